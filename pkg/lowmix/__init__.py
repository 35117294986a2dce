"""Top-level package for lowmix."""

__author__ = """lowmix developers"""
__email__ = "lowmix@users.noreply.github.com"
__version__ = "0.1.0"

import logging
from typing import Optional

from attrs import define

from lowmix.exceptions import ConfigError

logging.getLogger(__name__).addHandler(logging.NullHandler())

_NODE_AVERAGES = ("arithmetic", "harmonic")


@define
class _Config:
    _clamp_eps: float = 1e-12
    _strict: bool = False
    _node_average: str = "arithmetic"
    _wall_noise_sqrt2: bool = True
    _verbose: bool = False
    _output_dir: Optional[str] = None

    @property
    def clamp_eps(self) -> float:
        """Returns the concentration clamp window used before coefficient evaluation"""
        return self._clamp_eps

    @property
    def strict(self) -> bool:
        """Returns whether stability advisories are raised as errors"""
        return self._strict

    @property
    def node_average(self) -> str:
        """Returns the rule used to average cell viscosities to nodes"""
        return self._node_average

    @property
    def wall_noise_sqrt2(self) -> bool:
        """Returns whether off-diagonal stress noise on wall nodes is scaled by sqrt(2)"""
        return self._wall_noise_sqrt2

    @property
    def verbose(self) -> bool:
        """Returns whether solver iteration logs are emitted at INFO level"""
        return self._verbose

    @property
    def output_dir(self) -> Optional[str]:
        """Returns the default directory for snapshots and checkpoints"""
        return self._output_dir

    def set_clamp_eps(self, clamp_eps: float) -> None:
        """Sets the concentration clamp window"""
        if not clamp_eps >= 0.0:
            raise ConfigError(f"invalid value for clamp_eps ({clamp_eps!r}), should be >= 0")
        self._clamp_eps = float(clamp_eps)

    def set_strict(self, strict: bool) -> None:
        """Sets strict mode, turning stability advisories into errors"""
        self._strict = bool(strict)

    def set_node_average(self, rule: str) -> None:
        """Sets the cell-to-node viscosity averaging rule"""
        if rule not in _NODE_AVERAGES:
            raise ConfigError(f"invalid value for node_average ({rule!r}), should be arithmetic|harmonic")
        self._node_average = rule

    def set_wall_noise_sqrt2(self, enabled: bool) -> None:
        """Sets the wall-node stress noise scaling switch"""
        self._wall_noise_sqrt2 = bool(enabled)

    def set_verbose(self, verbose: bool) -> None:
        """Sets solver log verbosity"""
        self._verbose = bool(verbose)

    def set_output_dir(self, output_dir: str) -> None:
        """Sets the default output directory"""
        self._output_dir = output_dir.rstrip("/")


config: _Config = _Config()
