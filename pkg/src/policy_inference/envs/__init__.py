from . import ctp, rocksample

__all__ = ["ctp", "rocksample"]
