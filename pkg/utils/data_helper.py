import hashlib
import json
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Iterator, Mapping

import numpy as np
import pandas as pd

FLOAT_FORMAT = '%.15g'


def to_builtin(value: Any) -> Any:
    """
    Convert numpy scalars, arrays, enums, tuples and paths into JSON-friendly builtins.

    Args:
        value (Any): Arbitrary nested structure.

    Returns:
        Any: The same structure made of dict/list/str/int/float/bool/None.
    """
    if isinstance(value, Mapping):
        return {str(to_builtin(key)): to_builtin(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_builtin(item) for item in value]
    if isinstance(value, np.ndarray):
        return to_builtin(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, complex):
        return {'re': value.real, 'im': value.imag}
    if isinstance(value, Path):
        return str(value)
    if hasattr(value, 'value') and hasattr(value, 'name'):  # Enum
        return value.value
    return value


def canonical_json(value: Any) -> str:
    """
    Serialize a structure to JSON with sorted keys and no insignificant whitespace.
    """
    return json.dumps(to_builtin(value), sort_keys=True, separators=(',', ':'))


def config_hash(value: Any) -> str:
    """
    Return the sha256 hex digest of the canonical JSON form of a configuration.
    """
    return hashlib.sha256(canonical_json(value).encode('utf-8')).hexdigest()


@contextmanager
def atomic_path(path: str | Path, mode: str = 'w', **kwargs) -> Iterator[Any]:
    """
    Open a temporary file next to `path` and rename it over `path` once the block succeeds.

    Args:
        path (str | Path): Final artifact location.
        mode (str): File mode for the temporary handle ('w' or 'wb').

    Yields:
        The open temporary file handle.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f'.{path.name}.', suffix='.tmp', dir=path.parent)
    try:
        with os.fdopen(fd, mode, **kwargs) as handle:
            yield handle
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.remove(tmp_name)
        raise


def atomic_write_text(path: str | Path, text: str) -> Path:
    """
    Write text atomically (temp file + rename).
    """
    with atomic_path(path, 'w', encoding='utf-8', newline='\n') as handle:
        handle.write(text)
    return Path(path)


def write_json(path: str | Path, payload: Any) -> Path:
    """
    Write a pretty-printed JSON record atomically.
    """
    return atomic_write_text(path, json.dumps(to_builtin(payload), indent=2, sort_keys=True) + '\n')


def write_csv(path: str | Path, frame: pd.DataFrame, metadata: Mapping[str, Any] | None = None) -> Path:
    """
    Write a CSV artifact: `#`-prefixed metadata comments, a header row, comma separated, `.` decimals.

    Args:
        path (str | Path): Destination file.
        frame (pd.DataFrame): Table body.
        metadata (Mapping[str, Any] | None): Key/value pairs emitted as `# key: value` lines in sorted order.

    Returns:
        Path: The written path.
    """
    lines = [f'# {key}: {canonical_json(value) if not isinstance(value, str) else value}'
             for key, value in sorted((metadata or {}).items())]
    body = frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    header = '\n'.join(lines) + '\n' if lines else ''
    return atomic_write_text(path, header + body)


def read_csv(path: str | Path) -> pd.DataFrame:
    """
    Read a CSV artifact written by `write_csv`, skipping the metadata comments.
    """
    return pd.read_csv(path, comment='#')


def read_csv_metadata(path: str | Path) -> dict[str, str]:
    """
    Collect the `# key: value` header comments of a CSV artifact.
    """
    metadata = {}
    with open(path, encoding='utf-8') as handle:
        for line in handle:
            if not line.startswith('#'):
                break
            key, _, value = line[1:].strip().partition(':')
            metadata[key.strip()] = value.strip()
    return metadata
