from pathlib import Path

from django import forms

from core.decorators import one_line
from core.exceptions import InvalidParameter
from discretization.services import MIN_CELLS, assemble_generator, build_grid, required_nonlocal_cells
from evolution.models import AUTO, Scheme
from evolution.services import make_scheme, resolve_dt
from kernels.models import KernelFamily
from kernels.services import coupling_constants, make_kernel
from .models import InitKind


def auto_or_positive(value, label):
    value = value.strip().lower()
    if value == AUTO:
        return AUTO
    try:
        number = float(value)
    except ValueError:
        raise forms.ValidationError(f"expected 'auto' or a number, got '{value}'")
    if not number > 0 or number == float('inf'):
        raise forms.ValidationError(f"{label} must be a positive number, got {value}")
    return number


class SimConfigForm(forms.Form):
    kernel_family = forms.ChoiceField(choices=KernelFamily.choices)
    kernel_radius = forms.FloatField()
    kernel_epsilon = forms.FloatField()

    grid_n_local = forms.IntegerField(min_value=MIN_CELLS)
    grid_n_nonlocal = forms.IntegerField(min_value=MIN_CELLS)

    time_scheme = forms.ChoiceField(choices=Scheme.choices)
    time_dt = forms.CharField()
    time_horizon = forms.FloatField()
    time_snapshot_stride = forms.IntegerField(min_value=0)

    picard_window = forms.CharField()
    picard_tol = forms.FloatField()
    picard_max_iters = forms.IntegerField(min_value=1)
    picard_substeps = forms.IntegerField(min_value=1)

    init_kind = forms.ChoiceField(choices=InitKind.choices)
    init_value = forms.FloatField()
    init_left = forms.FloatField()
    init_right = forms.FloatField()
    init_mode = forms.IntegerField(min_value=0)
    init_amplitude = forms.FloatField()
    init_center = forms.FloatField()
    init_width = forms.FloatField()
    init_path = forms.CharField(required=False)

    output_dir = forms.CharField(required=False)
    seed = forms.IntegerField(min_value=0)

    spectrum_n_samples = forms.IntegerField(min_value=10)
    analysis_n_modes = forms.IntegerField(min_value=1)

    def _positive(self, name, label):
        value = self.cleaned_data[name]
        if not value > 0:
            raise forms.ValidationError(f"{label} must be positive, got {value}")
        return value

    def clean_kernel_radius(self):
        return self._positive('kernel_radius', 'radius')

    def clean_kernel_epsilon(self):
        return self._positive('kernel_epsilon', 'epsilon')

    def clean_time_horizon(self):
        return self._positive('time_horizon', 'horizon')

    def clean_picard_tol(self):
        return self._positive('picard_tol', 'tolerance')

    def clean_init_width(self):
        return self._positive('init_width', 'width')

    def clean_time_dt(self):
        return auto_or_positive(self.cleaned_data['time_dt'], 'time step')

    def clean_picard_window(self):
        return auto_or_positive(self.cleaned_data['picard_window'], 'window')

    def clean(self):
        cleaned_data = super().clean()
        if self.errors:
            return cleaned_data

        if cleaned_data['init_kind'] == InitKind.FILE:
            path = cleaned_data['init_path']
            if not path:
                self.add_error('init_path', "required when init.kind = file")
            elif not Path(path).is_file():
                self.add_error('init_path', f"no such file '{path}'")

        kernel = make_kernel(cleaned_data['kernel_family'], cleaned_data['kernel_radius'], cleaned_data['kernel_epsilon'])
        required = required_nonlocal_cells(kernel)
        if cleaned_data['grid_n_nonlocal'] < required:
            self.add_error(
                'grid_n_nonlocal',
                f"{cleaned_data['grid_n_nonlocal']} cells under-resolve {kernel}; need at least {required}",
            )
            return cleaned_data

        constants = coupling_constants(kernel)
        window = cleaned_data['picard_window']
        if window != AUTO and window >= constants.picard_window_bound:
            self.add_error(
                'picard_window',
                f"{window:.6g} is not below 1/(2*c1 + c2) = {constants.picard_window_bound:.6g}",
            )
            return cleaned_data

        if cleaned_data['time_scheme'] != Scheme.IMPLICIT and cleaned_data['time_dt'] != AUTO:
            scheme = make_scheme(
                cleaned_data['time_scheme'],
                dt=cleaned_data['time_dt'],
                window=window,
                substeps=cleaned_data['picard_substeps'],
            )
            grid = build_grid(cleaned_data['grid_n_local'], cleaned_data['grid_n_nonlocal'])
            try:
                resolve_dt(scheme, assemble_generator(grid, kernel, constants))
            except InvalidParameter as exc:
                self.add_error('time_dt', one_line(exc))

        return cleaned_data
