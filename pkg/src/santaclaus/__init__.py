"""Max-min fair allocation with submodular valuations via multi-level configuration LPs."""

from .instance import Instance, InputError, load_instance, dump_instance

__all__ = ["Instance", "InputError", "load_instance", "dump_instance"]
__version__ = "0.1.0"
