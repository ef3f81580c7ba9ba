from django import forms
from django.core.exceptions import ValidationError

from .dp_policy import CostMode, CostModel
from .exceptions import ContractViolation, InvalidScenario
from .experiments import MAX_SEED, ExperimentSpec, Preset
from .fading_link import GAIN_LAWS, FadingConfig
from .fusion_sim import DetectorKind, SweepAxis
from .scenario import MeasurementModel, ScenarioConfig


def _choices(enum):
    return [(member.value, member.value) for member in enum]


class FloatListField(forms.CharField):
    """A single number or a comma-separated list of numbers."""

    def to_python(self, value):
        value = super().to_python(value)
        if not value:
            return ()
        try:
            return tuple(float(item) for item in value.split(','))
        except ValueError:
            raise ValidationError(f"expected a number or a comma-separated list of numbers, got {value!r}", code='invalid')


class DomainForm(forms.Form):
    """Form over one config section; only the keys actually given reach the domain object."""

    def provided(self):
        return {name: value for name, value in self.cleaned_data.items() if name in self.data}

    def build(self, **values):
        raise NotImplementedError

    def clean(self):
        cleaned_data = super().clean()
        if self.errors:
            return cleaned_data
        try:
            self.instance = self.build(**self.provided())
        except InvalidScenario as exc:
            raise ValidationError(str(exc), code=exc.invariant)
        except ContractViolation as exc:
            raise ValidationError(str(exc), code='contract')
        return cleaned_data


class ScenarioForm(DomainForm):
    M = forms.IntegerField(min_value=1, required=False)
    N = forms.IntegerField(min_value=1, required=False)
    K = forms.IntegerField(min_value=1, required=False)
    tau_s = forms.FloatField(required=False)
    tau_N = forms.FloatField(required=False)
    tau = forms.FloatField(required=False)
    pi0 = forms.FloatField(min_value=0.0, max_value=1.0, required=False)
    sigma2 = forms.FloatField(required=False)
    sigma2_s = FloatListField(required=False)
    measurement_model = forms.ChoiceField(choices=_choices(MeasurementModel), required=False)
    shift_means = FloatListField(
        required=False,
        help_text="Half-gaps mu_i between the two hypothesis means (mu_1 - mu_0) / 2.",
    )
    shift_center = FloatListField(
        required=False,
        help_text="Midpoints c_i; the means are c_i - mu_i under H0 and c_i + mu_i under H1.",
    )
    rng_seed = forms.IntegerField(min_value=0, max_value=MAX_SEED, required=False)

    def build(self, **values):
        return ScenarioConfig(**values)


class CostForm(DomainForm):
    mode = forms.ChoiceField(choices=_choices(CostMode), required=False)
    omega = forms.FloatField(min_value=0.0, max_value=1.0, required=False)
    R_p = forms.FloatField(min_value=0.0, required=False)
    R_s = forms.FloatField(min_value=0.0, required=False)
    eta_p = forms.FloatField(min_value=0.0, max_value=1.0, required=False)
    eta_s = forms.FloatField(min_value=0.0, max_value=1.0, required=False)
    delta_p = forms.FloatField(min_value=0.0, max_value=1.0, required=False)
    delta_s = forms.FloatField(min_value=0.0, max_value=1.0, required=False)
    e_pt = forms.FloatField(min_value=0.0, required=False)
    e_st = forms.FloatField(min_value=0.0, required=False)
    P_col = forms.FloatField(min_value=0.0, required=False)
    L_f = forms.FloatField(min_value=0.0, required=False)
    L_b = forms.FloatField(min_value=0.0, required=False)
    c = forms.FloatField(min_value=0.0, required=False)

    def build(self, **values):
        return CostModel(**values)


class FadingForm(DomainForm):
    W = forms.FloatField(required=False)
    bits = forms.FloatField(required=False)
    tau_b = forms.FloatField(required=False)
    tau_seconds = forms.FloatField(required=False)
    P_over_sigma = FloatListField(required=False)
    gap = FloatListField(required=False)
    gain_law = forms.ChoiceField(choices=[(name, name) for name in GAIN_LAWS], required=False)
    gain_mean = FloatListField(required=False)
    T_c = forms.IntegerField(min_value=1, required=False)

    def build(self, **values):
        return FadingConfig(**values)


class ExperimentForm(DomainForm):
    preset = forms.ChoiceField(choices=_choices(Preset), required=False)
    trials = forms.IntegerField(min_value=1, required=False)
    seed = forms.IntegerField(min_value=0, max_value=MAX_SEED, required=False)
    output_path = forms.CharField(required=False)
    detector = forms.ChoiceField(choices=_choices(DetectorKind), required=False)
    axis = forms.ChoiceField(choices=_choices(SweepAxis), required=False)
    values = FloatListField(required=False)

    def build(self, **values):
        return ExperimentSpec(**values)


SECTION_FORMS = {
    'scenario': ScenarioForm,
    'cost': CostForm,
    'fading': FadingForm,
    'experiment': ExperimentForm,
}
