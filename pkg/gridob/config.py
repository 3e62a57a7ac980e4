"""Run configuration for gridob."""

import os
import yaml
from pathlib import Path
from typing import Dict, Any, Optional, List
from dataclasses import dataclass, asdict

from .logger import get_logger

logger = get_logger(__name__)

REPORT_SCHEMA = "gridob-report/1"


@dataclass
class RunConfig:
    """Parameters shared by every subcommand."""
    # Grid
    n: int = 3
    o_perm: str = ""  # bracket notation, empty means O on the diagonal
    x_perm: str = ""  # bracket notation, empty means X shifted up one row
    random_markings: Optional[int] = None  # seed; overrides o_perm/x_perm
    grid_file: str = ""  # n=/O=/X= file; overrides everything above

    # Window
    K: int = 4  # grading cap for CD and CDP
    Nmax: int = 4  # cap on each N_j in CDP enumeration

    # Algebra
    ring: str = "f2"  # "f2", "z" or "both"
    s_params: str = ""  # bit string s_1..s_n, empty means all zeros
    sign_file: str = ""  # load a saved sign assignment instead of solving

    # Output
    output: str = ""  # JSON report path, empty means stdout only
    threads: int = 1
    audit_markings: bool = False
    debug: bool = False

    def to_dict(self) -> Dict[str, Any]:
        """Convert config to dictionary."""
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunConfig':
        """Create config from dictionary."""
        # Filter out any unknown keys
        valid_keys = {field for field in cls.__dataclass_fields__}
        filtered_data = {k: v for k, v in data.items() if k in valid_keys}
        return cls(**filtered_data)

    def s_param_bits(self) -> List[int]:
        """The s_j vector as a list of 0/1 values of length n."""
        if not self.s_params:
            return [0] * self.n
        return [int(ch) for ch in self.s_params]


def get_config_path() -> Path:
    """Get the path to the config file."""
    config_home = os.environ.get('XDG_CONFIG_HOME')
    if config_home:
        config_dir = Path(config_home) / "gridob"
    else:
        config_dir = Path.home() / ".config" / "gridob"

    config_dir.mkdir(parents=True, exist_ok=True)
    return config_dir / "config.yaml"


def load_config(path: Optional[Path] = None) -> RunConfig:
    """Load configuration from a YAML file, falling back to defaults."""
    config_path = Path(path) if path else get_config_path()
    logger.info(f"Loading config from: {config_path}")

    if not config_path.exists():
        logger.info("Config file not found, using defaults")
        return RunConfig()

    try:
        with open(config_path, 'r') as f:
            data = yaml.safe_load(f)

        if data is None:
            logger.warning("Config file is empty, using defaults")
            return RunConfig()

        config = RunConfig.from_dict(data)
        logger.info(f"Config loaded successfully (n: {config.n}, K: {config.K}, Nmax: {config.Nmax})")
        return config

    except Exception as e:
        logger.error(f"Could not load config from {config_path}: {e}", exc_info=True)
        return RunConfig()


def save_config(config: RunConfig, path: Optional[Path] = None) -> None:
    """Save configuration to a YAML file."""
    config_path = Path(path) if path else get_config_path()
    logger.info(f"Saving config to: {config_path}")

    try:
        with open(config_path, 'w') as f:
            yaml.safe_dump(config.to_dict(), f, default_flow_style=False, sort_keys=False)
        logger.info("Config saved successfully")
    except Exception as e:
        logger.error(f"Failed to save config: {e}", exc_info=True)
        raise RuntimeError(f"Failed to save config: {e}")


def _is_bracket_perm(text: str, n: int) -> bool:
    from .grid_core import parse_bracket

    try:
        return sorted(parse_bracket(text)) == list(range(n))
    except ValueError:
        return False


def validate_config(config: RunConfig) -> tuple[bool, Optional[str]]:
    """
    Validate configuration values.

    Returns:
        (is_valid, error_message)
    """
    if not isinstance(config.n, int) or config.n < 2:
        return False, f"Invalid n: {config.n}. Grids need n >= 2"

    valid_rings = ["f2", "z", "both"]
    if config.ring not in valid_rings:
        return False, f"Invalid ring: {config.ring}. Must be one of {valid_rings}"

    if config.K < 0:
        return False, f"Invalid K: {config.K}. Must be >= 0"
    if config.Nmax < 0:
        return False, f"Invalid Nmax: {config.Nmax}. Must be >= 0"
    if config.threads < 1:
        return False, f"Invalid threads: {config.threads}. Must be >= 1"

    if config.s_params:
        if len(config.s_params) != config.n or set(config.s_params) - {"0", "1"}:
            return False, f"Invalid s_params: {config.s_params!r}. Must be {config.n} bits"

    for name in ("o_perm", "x_perm"):
        value = getattr(config, name)
        if value and not _is_bracket_perm(value, config.n):
            return False, f"Invalid {name}: {value!r}. Must be a permutation of 1..{config.n}"

    if bool(config.o_perm) != bool(config.x_perm):
        return False, "o_perm and x_perm must be given together"

    if config.grid_file and not Path(config.grid_file).expanduser().exists():
        return False, f"Grid file does not exist: {config.grid_file}"

    if config.sign_file and not Path(config.sign_file).expanduser().exists():
        return False, f"Sign file does not exist: {config.sign_file}"

    return True, None
