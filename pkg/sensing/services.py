import configparser
import json
import logging
import math
import re
from dataclasses import replace
from pathlib import Path
from typing import NamedTuple, Optional

from django.conf import settings

from .dp_policy import POLICY_FORMAT_VERSION, CostModel, solve_backward, solve_one_threshold
from .exceptions import ConfigError, ContractViolation
from .experiments import ExperimentSpec, Preset, RunSettings, build_table
from .fading_link import FadingConfig
from .forms import SECTION_FORMS
from .models import ExperimentRun, PolicyRecord
from .scenario import ScenarioConfig

logger = logging.getLogger(__name__)

_SECTION_LINE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_LINE = re.compile(r"^\s*([^\s#;\[=:][^=:]*?)\s*[=:]")


class ConfigBundle(NamedTuple):
    scenario: ScenarioConfig
    cost: CostModel
    fading: Optional[FadingConfig]
    experiment: ExperimentSpec


class ConfigService:
    @staticmethod
    def _line_numbers(text):
        """Line of every section header and every key, for error messages."""
        lines = {}
        section = None
        for number, line in enumerate(text.splitlines(), start=1):
            header = _SECTION_LINE.match(line)
            if header:
                section = header.group(1).strip()
                lines.setdefault((section, None), number)
                continue
            key = _KEY_LINE.match(line)
            if key and section is not None:
                lines.setdefault((section, key.group(1)), number)
        return lines

    @staticmethod
    def _parser(text):
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=('#', ';'))
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.DuplicateOptionError as exc:
            raise ConfigError("duplicate key", exc.section, exc.option, exc.lineno) from exc
        except configparser.DuplicateSectionError as exc:
            raise ConfigError("duplicate section", exc.section, line=exc.lineno) from exc
        except configparser.MissingSectionHeaderError as exc:
            raise ConfigError("key outside of any section", line=exc.lineno) from exc
        except configparser.ParsingError as exc:
            line = exc.errors[0][0] if exc.errors else None
            raise ConfigError("cannot parse line", line=line) from exc
        return parser

    @staticmethod
    def parse(text):
        parser = ConfigService._parser(text)
        lines = ConfigService._line_numbers(text)
        for section in parser.sections():
            if section not in SECTION_FORMS:
                logger.warning("rejected unknown config section [%s]", section)
                raise ConfigError(f"unknown section, expected one of {sorted(SECTION_FORMS)}", section, line=lines.get((section, None)))

        instances = {}
        overrides = {}
        for section, form_class in SECTION_FORMS.items():
            data = dict(parser.items(section)) if parser.has_section(section) else {}
            for key in data:
                if key not in form_class.base_fields:
                    logger.warning("rejected unknown config key %s in [%s]", key, section)
                    raise ConfigError("unknown key", section, key, lines.get((section, key)))
            form = form_class(data=data)
            if not form.is_valid():
                key, messages = next(iter(form.errors.items()))
                key = None if key == '__all__' else key
                line = lines.get((section, key)) if key else lines.get((section, None))
                logger.warning("rejected config: [%s] %s: %s", section, key or '', messages[0])
                raise ConfigError(messages[0], section, key, line)
            instances[section] = form.instance
            overrides.update({f"{section}.{key}": value for key, value in data.items()})

        fading = instances['fading'] if parser.has_section('fading') else None
        if fading is not None:
            try:
                fading.check_sensor_count(instances['scenario'].M)
            except ContractViolation as exc:
                raise ConfigError(str(exc), 'fading', line=lines.get(('fading', None))) from exc
        experiment = replace(instances['experiment'], overrides=overrides)
        return ConfigBundle(instances['scenario'], instances['cost'], fading, experiment)

    @staticmethod
    def load_config(path):
        """Read and validate an INI experiment file; unset fields keep their defaults."""
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc.strerror or exc}") from exc
        return ConfigService.parse(text)


def _finite(value):
    return float(value) if math.isfinite(value) else None


class ExperimentService:
    @staticmethod
    def run_settings():
        return RunSettings(
            workers=settings.ORDFUSE_WORKERS,
            chunk_size=settings.ORDFUSE_CHUNK_SIZE,
            grid_size=settings.ORDFUSE_GRID_SIZE,
        )

    @staticmethod
    def output_dir(spec):
        return Path(spec.output_path or settings.ORDFUSE_OUTPUT_DIR)

    @staticmethod
    def run_experiment(spec, bundle):
        """Write the preset's CSV and its parameter sidecar, then record the run."""
        table, parameters = build_table(
            spec, bundle.scenario, bundle.cost, bundle.fading, ExperimentService.run_settings()
        )
        out_dir = ExperimentService.output_dir(spec)
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / f"{spec.preset.value}-seed{spec.seed}.csv"
        metadata_path = csv_path.with_suffix('.json')
        table.to_csv(csv_path, index=False, lineterminator='\n')
        metadata_path.write_text(json.dumps(parameters, indent=2, sort_keys=True) + '\n')

        run = ExperimentRun.objects.create(
            preset=spec.preset.value,
            detector=spec.detector.value if spec.preset is Preset.CUSTOM else '',
            seed=str(spec.seed),
            trials=spec.trials,
            parameters=parameters,
            csv_path=str(csv_path),
            metadata_path=str(metadata_path),
            row_count=len(table),
        )
        logger.info("wrote %d rows to %s", len(table), csv_path)
        return run


class PolicyService:
    @staticmethod
    def threshold_rows(policy):
        llr_low, llr_high = policy.llr_thresholds()
        return [
            {
                'k': k + 1,
                'pi_low': _finite(policy.pi_low[k]),
                'pi_high': _finite(policy.pi_high[k]),
                'llr_low': _finite(llr_low[k]),
                'llr_high': _finite(llr_high[k]),
            }
            for k in range(policy.K)
        ]

    @staticmethod
    def solve_policy(bundle, out_path, name=None, one_threshold=False):
        grid_size = settings.ORDFUSE_GRID_SIZE
        if one_threshold:
            policy = solve_one_threshold(bundle.scenario, bundle.cost, grid_size=grid_size)
        else:
            policy = solve_backward(bundle.scenario, bundle.cost, grid_size=grid_size)
        path = policy.save(out_path)
        record = PolicyRecord.objects.create(
            name=name or path.stem,
            mode=policy.mode.value,
            one_threshold=policy.one_threshold,
            M=bundle.scenario.M,
            K=policy.K,
            grid_size=policy.grid_size,
            format_version=POLICY_FORMAT_VERSION,
            thresholds=PolicyService.threshold_rows(policy),
            file_path=str(path),
        )
        logger.info("saved policy %s to %s", record.name, path)
        return policy, record
