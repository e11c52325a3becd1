import csv
import io
import logging

from discretization.services import snapshot_rows
from evolution.models import SERIES_COLUMNS
from utils.utils import format_number
from .config import manifest_text

logger = logging.getLogger(__name__)

SNAPSHOT_COLUMNS = ('x', 'w', 'region')
SPECTRUM_COLUMNS = ('n_local', 'n_nonlocal', 'epsilon', 'beta1', 'lambda2', 'residual', 'k_estimate')
SWEEP_COLUMNS = ('epsilon', 'n_nonlocal', 'dt', 'sup_error_l2', 'beta1_eps')
DECAY_COLUMNS = ('fitted_rate', 'beta1', 'lambda2', 'r_squared', 'bound_satisfied')
CHECK_COLUMNS = ('check', 'status', 'detail')


def cell(value):
    if value is None:
        return ''
    if isinstance(value, str):
        return value
    return format_number(value)


def write_csv(storage, name, header, rows):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([cell(value) for value in row])
    name = storage.write_text(name, buffer.getvalue())
    logger.info("wrote %s", storage.path(name))
    return name


def write_timeseries(storage, trajectory):
    return write_csv(storage, 'timeseries.csv', SERIES_COLUMNS, (record.as_row() for record in trajectory.series))


def write_snapshots(storage, trajectory):
    """One CSV per recorded state plus snapshots/index.csv; the final state if none were recorded."""
    snapshots = trajectory.snapshots or [(trajectory.times[-1], trajectory.final)]
    names = []
    index = []
    for number, (t, w) in enumerate(snapshots):
        name = write_csv(storage, f'snapshots/snapshot_{number:04d}.csv', SNAPSHOT_COLUMNS, snapshot_rows(w))
        names.append(name)
        index.append((number, t, name))
    names.append(write_csv(storage, 'snapshots/index.csv', ('index', 't', 'file'), index))
    return names


def write_spectrum(storage, row):
    return write_csv(storage, 'spectrum.csv', SPECTRUM_COLUMNS, [row])


def write_sweep(storage, rows):
    return write_csv(storage, 'sweep.csv', SWEEP_COLUMNS, (row.as_row() for row in rows))


def write_decay(storage, report):
    return write_csv(storage, 'decay.csv', DECAY_COLUMNS, [report.as_row()])


def write_checks(storage, results):
    return write_csv(storage, 'verify.csv', CHECK_COLUMNS, ((r.name, r.status, r.detail) for r in results))


def write_manifest(storage, config, **resolved):
    name = storage.write_text('manifest.cfg', manifest_text(config, **resolved))
    logger.info("wrote %s", storage.path(name))
    return name


def write_svg(storage, name, data):
    name = storage.write_bytes(name, data)
    logger.info("wrote %s", storage.path(name))
    return name
