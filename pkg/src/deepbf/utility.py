import hashlib
import io
import json
import os
import tempfile
import numpy as np
import pandas as pd
from pathlib import Path
from threading import Thread
from typing import Any, Callable, Optional
from . import __version__

def config_hash(document : Any) -> str:
    '''SHA-256 of the canonical JSON encoding (sorted keys, no whitespace).'''
    canonical = json.dumps(document, sort_keys = True, separators = (',', ':'), allow_nan = False)
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()

def provenance(cfg_hash : str, seed : int) -> str:
    return f'# deepbf={__version__} config_hash={cfg_hash} seed={seed}'

def atomic_write_text(path, text : str):
    path = Path(path)
    path.parent.mkdir(parents = True, exist_ok = True)
    fd, tmp = tempfile.mkstemp(dir = path.parent, prefix = f'.{path.name}.', suffix = '.tmp')
    try:
        with os.fdopen(fd, 'w', encoding = 'utf-8', newline = '\n') as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise

def write_csv(path, frame : pd.DataFrame, header : Optional[str] = None):
    '''Write ``frame`` as comma-separated UTF-8 with LF endings, prefixed by a provenance comment row.'''
    buffer = io.StringIO()
    if header is not None:
        buffer.write(header + '\n')
    frame.to_csv(buffer, index = False, lineterminator = '\n')
    atomic_write_text(path, buffer.getvalue())

def write_json(path, document : Any):
    atomic_write_text(path, json.dumps(document, sort_keys = True, indent = 1) + '\n')

def read_json(path) -> Any:
    with open(path, 'r', encoding = 'utf-8') as f:
        return json.load(f)

def read_table(path) -> pd.DataFrame:
    if not os.path.exists(path):
        raise FileNotFoundError(f'{path} does not exist')
    return pd.read_csv(path, comment = '#')

def read_datasets(path) -> np.ndarray:
    '''Observed-data CSV: header row, one dataset per row, one column per observation.'''
    table = read_table(path)
    return table.to_numpy(dtype = np.float64)

def fan_out(worker : Callable[[int], None], num_items : int, num_workers : int = 1):
    '''Run ``worker(i)`` for i in range(num_items) on up to ``num_workers`` threads.

    Items are dealt round-robin. The worker must write its result into a slot
    owned by item i, so the merged output does not depend on the thread count.
    The first captured error is re-raised after all threads have joined.
    '''
    num_workers = max(1, min(num_workers, num_items))
    if num_workers == 1:
        for i in range(num_items):
            worker(i)
        return

    errors = [None] * num_workers

    def run_safe(tid):
        try:
            for i in range(tid, num_items, num_workers):
                worker(i)
        except BaseException as error:
            errors[tid] = error

    threads = [Thread(target = run_safe, args = (tid, )) for tid in range(num_workers)]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()

    for error in errors:
        if error is not None:
            raise error

def log_interval(total : int) -> int:
    return min(max(1, (total + 4) // 5), 200)

def read_provenance(path) -> Optional[str]:
    '''The leading ``#`` comment row of a file written by ``write_csv``, if any.'''
    with open(path, 'r', encoding = 'utf-8') as f:
        first = f.readline().rstrip('\n')
    return first if first.startswith('#') else None
