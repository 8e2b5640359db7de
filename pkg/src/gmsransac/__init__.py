"""ORB features, grid-based motion statistics and confidence-prioritized RANSAC."""
from .errors import *  # noqa: F401,F403
from .features import FeatureConfig, FeatureSet, Keypoint, detect_fast, extract
from .gms import GmsConfig, GridSpec, ScoredMatch, gms_filter
from .imageio import GroundTruth, Image, load_image, synth_correspondences, warp_image
from .matcher import Match, match_bruteforce
from .metrics import EvalResult, evaluate
from .robust import Correspondences, Model, RansacConfig, partition, ransac, required_iterations

__version__ = "0.1.0"
