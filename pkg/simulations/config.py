"""Flat ``key = value`` run configuration.

One key per line, dotted names, ``#`` starts a comment. Every key has a
default, so a config file only lists what it changes.
"""
from pathlib import Path

from core.exceptions import InvalidParameter
from utils.utils import format_number
from .forms import SimConfigForm
from .models import SimConfig

DEFAULTS = {
    'kernel.family': 'triangle',
    'kernel.radius': '1',
    'kernel.epsilon': '1',
    'grid.n_local': '200',
    'grid.n_nonlocal': '200',
    'time.scheme': 'implicit',
    'time.dt': 'auto',
    'time.horizon': '10',
    'time.snapshot_stride': '0',
    'picard.window': 'auto',
    'picard.tol': '1e-10',
    'picard.max_iters': '50',
    'picard.substeps': '32',
    'init.kind': 'gaussian',
    'init.value': '1',
    'init.left': '1',
    'init.right': '0',
    'init.mode': '1',
    'init.amplitude': '1',
    'init.center': '-0.5',
    'init.width': '0.1',
    'init.path': '',
    'output.dir': '',
    'seed': '0',
    'spectrum.n_samples': '500',
    'analysis.n_modes': '256',
}

CONFIG_KEYS = tuple(DEFAULTS)


def field_name(key):
    return key.replace('.', '_')


KEY_BY_FIELD = {field_name(key): key for key in CONFIG_KEYS}


def parse_config_text(text):
    """Raw string values by dotted key; duplicates and malformed lines are rejected."""
    values = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition('=')
        key = key.strip()
        if not sep or not key:
            raise InvalidParameter(f"line {number}: expected 'key = value', got '{line}'")
        if key in values:
            raise InvalidParameter(f"line {number}: duplicate key '{key}'")
        values[key] = value.strip()
    return values


def parse_overrides(items):
    values = {}
    for item in items or ():
        key, sep, value = str(item).partition('=')
        if not sep or not key.strip():
            raise InvalidParameter(f"--set expects key=value, got '{item}'")
        values[key.strip()] = value.strip()
    return values


def read_config(path):
    try:
        text = Path(path).read_text(encoding='utf-8')
    except UnicodeDecodeError as exc:
        raise InvalidParameter(f"config {path} is not UTF-8") from exc
    except OSError as exc:
        raise InvalidParameter(f"cannot read config {path}: {exc.strerror or exc}") from exc
    return parse_config_text(text)


def validate_config(raw):
    unknown = sorted(set(raw) - set(DEFAULTS))
    if unknown:
        raise InvalidParameter(f"unknown key '{unknown[0]}'")
    merged = {**DEFAULTS, **raw}
    form = SimConfigForm({field_name(key): value for key, value in merged.items()})
    if not form.is_valid():
        raise InvalidParameter(form_error_message(form))
    return SimConfig(**form.cleaned_data)


def load_config(path, overrides=(), out=None):
    raw = read_config(path)
    raw.update(parse_overrides(overrides))
    if out:
        raw['output.dir'] = str(out)
    return validate_config(raw)


def form_error_message(form):
    name, errors = next(iter(form.errors.items()))
    message = errors.as_data()[0].messages[0]
    key = KEY_BY_FIELD.get(name)
    return f"{key}: {message}" if key else message


def config_value(value):
    if isinstance(value, str):
        return value
    return format_number(value)


def manifest_text(config, **resolved):
    """The config in file form, with resolved values substituted by field name."""
    lines = ['# resolved run configuration']
    for key in CONFIG_KEYS:
        name = field_name(key)
        value = resolved.get(name, getattr(config, name))
        lines.append(f"{key} = {config_value(value)}")
    return '\n'.join(lines) + '\n'
