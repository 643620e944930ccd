"""
Конфигурация эксперимента и загрузка пресетов.
Experiment configuration and preset loading.

Пресеты лежат в config/<name>.json и проверяются моделью pydantic; неизвестные поля
отклоняются. / Presets live in config/<name>.json and are validated by a pydantic model;
unknown fields are rejected.
"""
import json
from pathlib import Path
from typing import List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from app.config import OUTPUT_ROOT, PRESET_DIR
from errors import ConfigError, LabError
from flow import FlowConfig, FlowState, perturbation, stabilize
from grids import CylinderGrid

# Именованные возмущения: списки (j, m, amplitude[, label])
PERTURBATIONS = {
    'none': [],
    'kernel-quadratic': [[0, 2, 0.05]],
    # eps (y^2 - 2 + 0.5 y cos theta), eps = 0.05
    'kernel-tilt': [[0, 2, 0.05], [1, 1, 0.025]],
    'kernel-tilt-alt': [[0, 2, 0.05], [1, 1, 0.025], [2, 0, 0.02]],
    'rotation': [[1, 1, 0.02]],
    'rotation-alt': [[1, 1, 0.02], [2, 0, 0.005]],
    'orthogonal': [[2, 0, 0.02]],
    'axial-quartic': [[0, 4, 0.002]],
    # u = s(t): a round cylinder of radius sqrt(2) + 0.01
    'radial': [[0, 0, 0.01]],
    'unstable': [[0, 0, 0.05]],
}

CHECKS = ('stationarity', 'monotone', 'energy', 'flow_inequality', 'uniqueness', 'scale', 'mean_value')


class ExperimentConfig(BaseModel):
    """
    Полное описание прогона; одинаковые конфигурация и seed дают одинаковые CSV.
    Complete run description; identical config and seed give identical CSVs.
    """
    model_config = ConfigDict(extra='forbid', frozen=True)

    name: str = 'experiment'
    k: int = 1
    n: int = 2
    n_theta: int = Field(64, ge=8)
    M: int = Field(64, ge=4)
    L: float = Field(12.0, gt=2.0)
    n_y: int = Field(481, ge=21)
    dt: float = Field(0.01, gt=0.0)
    steps: int = Field(1000, ge=0)
    scheme: Literal['imex-spectral', 'explicit-rk4'] = 'imex-spectral'
    stabilize: bool = True
    perturbation: Union[str, List[List[float]]] = 'none'
    taper: bool = True
    cadence: int = Field(10, ge=1)
    checkpoint_every: int = Field(0, ge=0)
    seed: int = 0
    out_dir: Optional[str] = None
    y_derivative: Literal['fd', 'hermite'] = 'fd'
    norm_radius: Optional[float] = Field(None, gt=0.0)
    fit_radius: float = Field(4.0, gt=0.0)
    annotate: bool = True
    n_starts: int = Field(8, ge=1)
    eps0: float = Field(0.05, gt=0.0)
    ell: int = Field(2, ge=0, le=2)
    C_ell: float = Field(10.0, gt=0.0)
    tau: float = Field(0.5, gt=1.0 / 3.0, lt=1.0)
    t_min: float = 5.0
    axis_tol: float = Field(1e-3, gt=0.0)
    sum_tol: float = Field(1e-3, gt=0.0)
    stationarity_tol: float = Field(1e-10, gt=0.0)
    energy_tol: float = Field(1e-3, gt=0.0)
    phi_tol: float = Field(1e-6, gt=0.0)
    tilt_group: Optional[str] = None
    checks: List[str] = Field(default_factory=lambda: ['monotone'])

    @field_validator('n_theta')
    @classmethod
    def _even_theta(cls, value: int) -> int:
        if value % 2:
            raise ValueError('n_theta must be even')
        return value

    @field_validator('n_y')
    @classmethod
    def _odd_axis(cls, value: int) -> int:
        if value % 2 == 0:
            raise ValueError('n_y must be odd so that y = 0 is a node')
        return value

    @field_validator('checks')
    @classmethod
    def _known_checks(cls, value: List[str]) -> List[str]:
        unknown = sorted(set(value) - set(CHECKS))
        if unknown:
            raise ValueError(f'unknown checks {unknown}; allowed {list(CHECKS)}')
        return value

    @field_validator('perturbation')
    @classmethod
    def _known_perturbation(cls, value):
        if isinstance(value, str):
            if value not in PERTURBATIONS:
                raise ValueError(f'unknown perturbation preset {value}; allowed {sorted(PERTURBATIONS)}')
            return value
        for entry in value:
            if len(entry) not in (3, 4):
                raise ValueError(f'expected (j, m, amplitude[, label]), got {entry}')
            if entry[0] < 0 or entry[1] < 0 or entry[0] != int(entry[0]) or entry[1] != int(entry[1]):
                raise ValueError(f'j and m must be non-negative integers, got {entry}')
        return value

    @model_validator(mode='after')
    def _consistent(self) -> 'ExperimentConfig':
        if (self.k, self.n) != (1, 2):
            raise ValueError('the nodal flow grid supports k = 1, n = 2 only')
        for entry in self.perturbation_spec:
            if entry[0] > self.n_theta // 2 or entry[1] > self.M:
                raise ValueError(f'mode {entry[:2]} is not resolved by n_theta = {self.n_theta}, M = {self.M}')
        if self.norm_radius is not None and self.norm_radius >= self.L:
            raise ValueError('norm_radius must be smaller than L')
        if self.fit_radius >= self.L:
            raise ValueError('fit_radius must be smaller than L')
        needs_axis = sorted({'uniqueness', 'scale'} & set(self.checks))
        if needs_axis and not self.annotate:
            raise ValueError(f'checks {needs_axis} need annotate = true')
        if self.tilt_group and not self.annotate:
            raise ValueError('tilt_group compares fitted axes and needs annotate = true')
        return self

    @property
    def perturbation_spec(self) -> List[List[float]]:
        if isinstance(self.perturbation, str):
            return PERTURBATIONS[self.perturbation]
        return self.perturbation

    @property
    def output_dir(self) -> Path:
        return Path(self.out_dir) if self.out_dir else OUTPUT_ROOT / self.name

    def grid(self) -> CylinderGrid:
        return CylinderGrid(n_theta=self.n_theta, n_y=self.n_y, L=self.L, M=self.M)

    def flow_config(self) -> FlowConfig:
        return FlowConfig(dt=self.dt, scheme=self.scheme, stabilize=self.stabilize,
                          method=self.y_derivative, norm_radius=self.norm_radius)

    def initial_state(self) -> FlowState:
        u = perturbation(self.grid(), self.perturbation_spec, taper=self.taper)
        if self.stabilize:
            u = stabilize(u)
        return FlowState(0.0, u, self.flow_config())

    def echo(self) -> dict:
        return self.model_dump(mode='json')


def validate_config(data: dict, source: str = '<dict>') -> ExperimentConfig:
    """
    Проверка словаря конфигурации.
    Validates a configuration dictionary.

    Raises:
        ConfigError: со списком некорректных полей / listing the offending fields
    """
    try:
        return ExperimentConfig(**data)
    except ValidationError as e:
        fields = sorted({'.'.join(str(part) for part in err['loc']) or '<root>' for err in e.errors()})
        raise ConfigError(f"Некорректная конфигурация {source}: {fields}", fields) from e
    except LabError as e:
        raise ConfigError(f"Некорректная конфигурация {source}: {e}", []) from e


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """
    Загружает конфигурацию из JSON файла.
    Loads a configuration from a JSON file.

    Raises:
        ConfigError: файл не найден, некорректный JSON или поля / missing file, invalid JSON or fields
    """
    path = Path(path)
    try:
        with open(path, 'r', encoding='utf-8') as file:
            data = json.load(file)
    except (FileNotFoundError, json.JSONDecodeError) as e:
        raise ConfigError(f"Ошибка загрузки конфигурации {path}: {e}", []) from e
    if not isinstance(data, dict):
        raise ConfigError(f"Конфигурация {path} должна быть объектом JSON", [])
    data.setdefault('name', path.stem)
    return validate_config(data, str(path))


def load_preset(name: str, preset_dir: Path = PRESET_DIR) -> ExperimentConfig:
    """Пресет по имени из config/ или путь к файлу / Preset by name from config/ or a file path."""
    path = Path(name)
    if path.suffix == '.json' and path.exists():
        return load_config(path)
    return load_config(Path(preset_dir) / f'{name}.json')


def list_presets(preset_dir: Path = PRESET_DIR) -> List[str]:
    return sorted(p.stem for p in Path(preset_dir).glob('*.json'))
