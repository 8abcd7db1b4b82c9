"""Figure renderer for superburst experiment bundles.

Consumes only the CSV tables and JSON manifests the `superburst` CLI writes;
it never imports the simulation package, so archived bundles render the same
way as fresh ones.
"""

from .io import BundleError
from .render import RENDERERS, render_preset

__version__ = "0.1.0"

__all__ = ["BundleError", "RENDERERS", "render_preset", "__version__"]
