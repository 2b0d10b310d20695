"""MAT-file to SMSB cube/label conversion for the benchmark scenes."""

from .convert import ConvertError, convert, load_cube, load_labels
from .recipes import CLASS_COLORS, RECIPES, DatasetRecipe

__version__ = "0.1.0"
