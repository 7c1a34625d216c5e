import os
from functools import lru_cache


def manifests_dir_path() -> str:
    return os.path.dirname(__file__)


@lru_cache(maxsize=128)
def get_manifest_path(file_name: str) -> str:
    return os.path.join(manifests_dir_path(), file_name)


def list_manifests() -> list[str]:
    """File names of every shipped figure-reproduction manifest."""
    return sorted(name for name in os.listdir(manifests_dir_path()) if name.endswith('.yaml'))
