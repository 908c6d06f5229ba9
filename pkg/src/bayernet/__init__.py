"""Channel-by-channel residual CNN demosaicking for Bayer CFA images."""
__version__ = "0.1.0"

from .estimators import BayerMosaicker, ChannelDemosaicker, HQLIDemosaicker
from .hqli import difference_planes, hqli
from .image import BayerLayout, MosaicImage, clip, extract_patches, mosaic, pixel_sets, psnr, psnr_report
from .pipeline import DemosaicModel, demosaic, demosaic_batch

__all__ = [
    "BayerLayout",
    "BayerMosaicker",
    "ChannelDemosaicker",
    "DemosaicModel",
    "HQLIDemosaicker",
    "MosaicImage",
    "clip",
    "demosaic",
    "demosaic_batch",
    "difference_planes",
    "extract_patches",
    "hqli",
    "mosaic",
    "pixel_sets",
    "psnr",
    "psnr_report",
]
