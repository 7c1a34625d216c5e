import json
import logging
from dataclasses import asdict
from pathlib import Path

import numpy as np

from lattice.topology import KagomeTopology
from peps.state import PepsConfig, PepsState, empty_state
from utils.data_helper import atomic_path, to_builtin
from utils.errors import StateError

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = 'kagome-peps-checkpoint/1'


def save_checkpoint(state: PepsState, path: str | Path) -> Path:
    """
    Store config, seed and every tensor in an `.npz` container with a JSON header of explicit shapes.
    """
    config = asdict(state.config)
    config['bond_dims'] = [[u, v, dim] for (u, v), dim in sorted(state.bond_dims.items())]
    header = {
        'format': CHECKPOINT_FORMAT,
        'config': to_builtin(config),
        'seed': state.config.seed,
        'shapes': {str(site): list(tensor.data.shape) for site, tensor in state.tensors.items()},
        'dtype': 'complex128',
    }
    arrays = {f'site_{site}': tensor.data for site, tensor in state.tensors.items()}
    with atomic_path(path, 'wb') as handle:
        np.savez(handle, header=np.array(json.dumps(header, sort_keys=True)), **arrays)
    logger.info(f'Checkpoint with {len(arrays)} tensors written to {path}')
    return Path(path)


def load_checkpoint(path: str | Path, topology: KagomeTopology) -> PepsState:
    """
    Read a checkpoint back bit-exactly.

    Raises:
        StateError: On an unknown format or a shape that disagrees with the header.
    """
    with np.load(path, allow_pickle=False) as archive:
        header = json.loads(str(archive['header']))
        if header.get('format') != CHECKPOINT_FORMAT:
            raise StateError(f'{path} is not a PEPS checkpoint (format {header.get("format")!r})')
        config = dict(header['config'])
        config['bond_dims'] = {(u, v): dim for u, v, dim in config['bond_dims']}
        state = empty_state(PepsConfig(**config), topology)
        for site in topology.sites:
            data = archive[f'site_{site}']
            if list(data.shape) != header['shapes'][str(site)]:
                raise StateError(f'Tensor for site {site} has shape {data.shape}, header says '
                                 f'{header["shapes"][str(site)]}')
            state.set_array(site, data)
    return state
