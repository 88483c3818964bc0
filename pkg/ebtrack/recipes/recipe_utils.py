import os
import json
import hashlib
import logging
import argparse
import datetime as pydt
from typing import Union, Sequence, Optional

import numpy as np

import ebtrack
from ebtrack.formatters.args import valid_existing_path, valid_writable_path

_logger = logging.getLogger(__name__)


def derive_seed(seed: int, stage: str) -> int:
    """Stable 32-bit seed of a stage, derived from the master seed and the stage name"""
    digest = hashlib.sha256(f"{seed}:{stage}".encode('utf-8')).hexdigest()
    return int(digest[:8], 16)


def require_option(args: argparse.Namespace, name: str) -> str:
    """Get an option that the stage cannot run without

    Raises
    ------
    ValueError
        if the option is unset
    """
    value = getattr(args, name, None)
    if value is None:
        raise ValueError("The --%s option is required for this stage." % name.replace('_', '-'))
    return value


def check_inputs(*paths: Union[str, os.PathLike]) -> None:
    """Raise FileNotFoundError (or PermissionError) unless every input path is readable"""
    for p in paths:
        valid_existing_path(p)


def check_output(path: Union[str, os.PathLike]) -> Union[str, os.PathLike]:
    """Make sure the output location is writable, creating its directory when needed"""
    return valid_writable_path(path)


def file_digest(path: Union[str, os.PathLike]) -> str:
    """sha256 of a file's content"""
    sha = hashlib.sha256()
    with open(path, 'rb') as f:
        for block in iter(lambda: f.read(1 << 20), b''):
            sha.update(block)
    return sha.hexdigest()


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (pydt.time, pydt.date)):
        return value.isoformat()
    if isinstance(value, np.generic):
        return value.item()
    return value


def manifest_path(out: Union[str, os.PathLike]) -> str:
    out = str(out)
    if out.endswith(('/', os.sep)):
        return out + 'manifest.json'
    return out + '.manifest.json'


def write_manifest(out: Union[str, os.PathLike],
                   stage: str,
                   inputs: Sequence[Union[str, os.PathLike]],
                   options: Union[dict, argparse.Namespace],
                   seed: Optional[int] = None,
                   outputs: Sequence[Union[str, os.PathLike]] = ()) -> str:
    """Write the run manifest of a stage next to its output

    The manifest lists the package version, sha256 of each input, the resolved options and the seed.
    It holds no wall-clock information, so identical runs give identical manifests.

    Returns
    -------
    str
        path of the manifest
    """
    if isinstance(options, argparse.Namespace):
        options = vars(options)
    content = {
        'stage': stage,
        'version': ebtrack.__version__,
        'inputs': {str(p): file_digest(p) for p in inputs},
        'outputs': [str(p) for p in outputs],
        'options': _jsonable({k: v for k, v in sorted(options.items())}),
        'seed': seed,
    }
    path = manifest_path(out)
    with open(path, 'w') as f:
        json.dump(content, f, indent=1, sort_keys=True)
    _logger.debug("Wrote the run manifest <%s>", path)
    return path
