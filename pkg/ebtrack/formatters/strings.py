import os

__all__ = ['with_suffix']


def with_suffix(prefix: str, suffix: str) -> str:
    """Build an output path from a prefix, e.g. ('out/matrix', 'mask.csv') -> 'out/matrix_mask.csv'

    A prefix that names a directory (ends with a separator) gets the bare suffix.
    """
    prefix = str(prefix)
    if prefix.endswith(('/', os.sep)):
        return prefix + suffix
    return "{0}_{1}".format(prefix, suffix)
