"""Hyperparameter containers with the package defaults."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import BadConfig


@dataclass(frozen=True)
class LassoParams:
    n_lambdas: int = 50
    lambda_decades: float = 4.0
    tol: float = 1e-7
    max_outer: int = 100
    max_sweeps: int = 200
    max_cycles: int = 50
    inner_folds: int = 5
    # throwaway path fits during penalty selection run with hard effort caps;
    # near the selected penalty they converge well before hitting them
    select_tol: float = 1e-5
    select_max_outer: int = 5
    select_max_sweeps: int = 30
    select_max_cycles: int = 3

    def validate(self) -> None:
        if self.n_lambdas < 1 or self.max_outer < 1 or self.max_sweeps < 1:
            raise BadConfig("lasso counts must be >= 1")
        if self.tol <= 0 or self.select_tol <= 0:
            raise BadConfig("lasso tolerance must be > 0")
        if self.inner_folds < 2:
            raise BadConfig("inner_folds must be >= 2")


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 500
    mtry: int | None = None   # None -> floor(sqrt(p))
    max_depth: int = 0        # 0 -> unlimited
    min_leaf: int = 5

    def validate(self) -> None:
        if self.n_trees < 1 or self.min_leaf < 1:
            raise BadConfig("forest counts must be >= 1")
        if self.mtry is not None and self.mtry < 1:
            raise BadConfig("mtry must be >= 1 when given")


@dataclass(frozen=True)
class Hyperparams:
    lasso: LassoParams = field(default_factory=LassoParams)
    forest: ForestParams = field(default_factory=ForestParams)
    seed: int = 0

    def validate(self) -> None:
        self.lasso.validate()
        self.forest.validate()
