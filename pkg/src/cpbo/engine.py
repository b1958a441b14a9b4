"""The optimization loop: propose a candidate pair, collect one preference and
two constraint values, update the surrogates, track history and incumbent.

All engine coordinates live in the unit box [0,1]^N; callers map to native
domains.  A single engine instance is single-writer (propose / feedback
strictly alternate); independent instances run in parallel with their own rngs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from cpbo.acquisition import AcqConfig, maximize_pair
from cpbo.gp import GPModel, condition_gp, fit_gp, gp_posterior, prior_model
from cpbo.kernels import MATERN52, KernelSpec
from cpbo.prefgp import PreferenceDataset, PreferenceModel, fit_preference_model

# beyond this training size, constraint hyperparameters are refit every
# REFIT_STRIDE iterations instead of every iteration (runtime guard; the data
# term is still updated every iteration)
REFIT_FULL_LIMIT = 400
REFIT_STRIDE = 5


class Policy(str, Enum):
    EUBOC = "euboc"
    EUBOC_COLD = "euboc-cold"
    EUBO = "eubo"
    EUBO_CONS = "eubo-cons"
    RANDOM = "random"

    @property
    def uses_constraint_model(self) -> bool:
        return self in (Policy.EUBOC, Policy.EUBOC_COLD)

    @property
    def acquisition(self) -> str | None:
        if self in (Policy.EUBOC, Policy.EUBOC_COLD):
            return "euboc"
        if self in (Policy.EUBO, Policy.EUBO_CONS):
            return "eubo"
        return None


def auto_win_rule(c_i: float, c_j: float, lam: float):
    """'i' or 'j' when exactly one candidate is feasible, else None."""
    fi, fj = c_i >= lam, c_j >= lam
    if fi and not fj:
        return "i"
    if fj and not fi:
        return "j"
    return None


@dataclass
class HistoryRecord:
    n: int
    x_i: np.ndarray
    x_j: np.ndarray
    winner: str  # 'i' or 'j'
    c_i: float
    c_j: float
    auto_won: bool = False

    def to_json(self) -> str:
        return json.dumps(
            {
                "n": self.n,
                "x_i": list(map(float, self.x_i)),
                "x_j": list(map(float, self.x_j)),
                "winner": self.winner,
                "c_i": self.c_i,
                "c_j": self.c_j,
                "auto_won": self.auto_won,
            }
        )

    @staticmethod
    def from_json(line: str) -> "HistoryRecord":
        d = json.loads(line)
        return HistoryRecord(
            n=d["n"],
            x_i=np.array(d["x_i"]),
            x_j=np.array(d["x_j"]),
            winner=d["winner"],
            c_i=d["c_i"],
            c_j=d["c_j"],
            auto_won=d.get("auto_won", False),
        )


def history_to_jsonl(records) -> str:
    return "".join(r.to_json() + "\n" for r in records)


def history_from_jsonl(text: str):
    return [HistoryRecord.from_json(ln) for ln in text.splitlines() if ln.strip()]


def _child_seed(root: int, *key) -> int:
    return int(np.random.SeedSequence([root, *key]).generate_state(1)[0])


class Engine:
    """One constrained preferential optimization run."""

    def __init__(
        self,
        dim: int,
        policy: Policy | str,
        lam: float = 0.0,
        seed: int = 0,
        sigma_cmp: float = 1.0,
        num_restarts: int = 3,
        raw_samples: int = 512,
    ):
        self.dim = dim
        self.policy = Policy(policy)
        self.lam = float(lam)
        self.seed = int(seed)
        self.num_restarts = num_restarts
        self.raw_samples = raw_samples
        self.iteration = 0  # completed iterations
        self.history: list[HistoryRecord] = []
        self.pending: tuple[np.ndarray, np.ndarray] | None = None

        self.pref_ds = PreferenceDataset(dim, sigma_cmp=sigma_cmp)
        self.warm_X = np.zeros((0, dim))
        self.warm_c = np.zeros(0)
        self.constraint_model: GPModel | None = (
            prior_model(MATERN52, dim) if self.policy.uses_constraint_model else None
        )
        self._last_constraint_kernel: KernelSpec | None = None
        self._pref_model_cache: PreferenceModel | None = None

    # ----- warm start ---------------------------------------------------

    def warm_start(self, constraint_eval, n_points: int, seed: int | None = None):
        """Pre-train the constraint surrogate on uniform random samples."""
        if not self.policy.uses_constraint_model:
            raise ValueError(f"policy {self.policy.value} has no constraint surrogate")
        if n_points < 0:
            raise ValueError("n_points must be >= 0")
        s = self.seed if seed is None else seed
        rng = np.random.default_rng(_child_seed(s, 101))
        X = rng.uniform(size=(n_points, self.dim))
        c = np.array([float(constraint_eval(x)) for x in X])
        bad = np.where(~np.isfinite(c))[0]
        if bad.size:
            raise ValueError(f"constraint returned non-finite value at {X[bad[0]]}")
        self.warm_X = X
        self.warm_c = c
        self._refit_constraint(initial=True)
        return self.constraint_model

    # ----- surrogate refits --------------------------------------------

    def _constraint_data(self):
        xs = [self.warm_X]
        cs = [self.warm_c]
        for r in self.history:
            xs.append(r.x_i[None, :])
            xs.append(r.x_j[None, :])
            cs.append(np.array([r.c_i, r.c_j]))
        return np.vstack(xs), np.concatenate(cs)

    def _refit_constraint(self, initial: bool = False):
        X, c = self._constraint_data()
        if X.shape[0] == 0:
            self.constraint_model = prior_model(MATERN52, self.dim)
            return
        n = X.shape[0]
        full_due = initial or n <= REFIT_FULL_LIMIT or self.iteration % REFIT_STRIDE == 0
        seed = _child_seed(self.seed, 1, 0 if initial else self.iteration)
        if full_due:
            restarts = 3 if self._last_constraint_kernel is None else 1
            model = fit_gp(
                X,
                c,
                kind=MATERN52,
                restarts=restarts,
                seed=seed,
                init=self._last_constraint_kernel,
                max_opt_iter=100 if n <= REFIT_FULL_LIMIT else 20,
            )
            self._last_constraint_kernel = model.kernel
        else:
            model = condition_gp(X, c, self._last_constraint_kernel)
        self.constraint_model = model

    def _refit_pref(self):
        init = self._pref_model_cache.kernel if self._pref_model_cache else None
        restarts = 2 if self.iteration <= 3 else 1
        self._pref_model_cache = fit_preference_model(
            self.pref_ds,
            restarts=restarts,
            seed=_child_seed(self.seed, 2, self.iteration),
            init=init,
            max_opt_iter=15,
        )

    @property
    def pref_model(self) -> PreferenceModel:
        if self._pref_model_cache is None:
            self._pref_model_cache = fit_preference_model(self.pref_ds)
        return self._pref_model_cache

    @pref_model.setter
    def pref_model(self, value):
        self._pref_model_cache = value

    # ----- the loop -----------------------------------------------------

    def propose_pair(self):
        if self.pending is not None:
            raise RuntimeError("a pair is already pending feedback")
        it = self.iteration + 1
        acq = self.policy.acquisition
        if self.policy.uses_constraint_model:
            # a constraint surrogate fit to fewer observations than it has
            # free quantities (dim lengthscales + scale + mean, two points
            # each) is unreliable; explore uniformly until the data can
            # support a fit
            n_cons = self.warm_X.shape[0] + 2 * len(self.history)
            ready = n_cons >= 2 * (self.dim + 1)
        else:
            ready = bool(self.pref_ds.comparisons)
        # cold start: without any comparisons or a supportable constraint
        # model every acquisition is flat, so fall back to a uniform pair
        if acq is None or not ready:
            rng = np.random.default_rng(_child_seed(self.seed, 3, it))
            pair = rng.uniform(size=(2, self.dim))
            self.pending = (pair[0], pair[1])
        else:
            cfg = AcqConfig(
                lam=self.lam,
                num_restarts=self.num_restarts,
                raw_samples=self.raw_samples,
                seed=_child_seed(self.seed, 4, it),
            )
            cm = self.constraint_model if self.policy.uses_constraint_model else None
            xi, xj = maximize_pair(self.pref_model, cm, cfg, policy=acq)
            self.pending = (xi, xj)
        return self.pending

    def apply_feedback(self, winner: str, c_i: float, c_j: float, auto_won: bool = False):
        if self.pending is None:
            raise RuntimeError("no pending pair")
        if winner not in ("i", "j"):
            raise ValueError("winner must be 'i' or 'j'")
        xi, xj = self.pending
        self.pending = None
        self.iteration += 1
        rec = HistoryRecord(
            n=self.iteration,
            x_i=xi,
            x_j=xj,
            winner=winner,
            c_i=float(c_i),
            c_j=float(c_j),
            auto_won=auto_won,
        )
        self.history.append(rec)

        ii = self.pref_ds.add_point(xi)
        ij = self.pref_ds.add_point(xj)
        if winner == "i":
            self.pref_ds.add_comparison(ii, ij)
        else:
            self.pref_ds.add_comparison(ij, ii)
        self._refit_pref()
        if self.policy.uses_constraint_model:
            self._refit_constraint()
        return rec

    def incumbent(self):
        """Feasible observed point with the highest posterior utility mean."""
        pts = []
        for r in self.history:
            if r.c_i >= self.lam:
                pts.append(r.x_i)
            if r.c_j >= self.lam:
                pts.append(r.x_j)
        if not pts:
            return None
        P = np.vstack(pts)
        means = self.pref_model.posterior(P).means
        k = int(np.argmax(means))
        return P[k], float(means[k])

    # ----- persistence / replay ----------------------------------------

    def history_jsonl(self) -> str:
        return history_to_jsonl(self.history)

    def snapshot(self) -> dict:
        return {
            "dim": self.dim,
            "policy": self.policy.value,
            "lam": self.lam,
            "seed": self.seed,
            "sigma_cmp": self.pref_ds.sigma_cmp,
            "num_restarts": self.num_restarts,
            "raw_samples": self.raw_samples,
            "warm_X": self.warm_X.tolist(),
            "warm_c": self.warm_c.tolist(),
            "history": [json.loads(r.to_json()) for r in self.history],
            "pending": None
            if self.pending is None
            else [list(map(float, self.pending[0])), list(map(float, self.pending[1]))],
        }

    @staticmethod
    def restore(snap: dict) -> "Engine":
        """Rebuild an engine by replaying its recorded feedback sequence."""
        eng = Engine(
            dim=snap["dim"],
            policy=snap["policy"],
            lam=snap["lam"],
            seed=snap["seed"],
            sigma_cmp=snap.get("sigma_cmp", 1.0),
            num_restarts=snap.get("num_restarts", 3),
            raw_samples=snap.get("raw_samples", 512),
        )
        eng.warm_X = np.array(snap["warm_X"]).reshape(-1, eng.dim)
        eng.warm_c = np.array(snap["warm_c"])
        if eng.policy.uses_constraint_model and eng.warm_X.shape[0]:
            eng._refit_constraint(initial=True)
        for d in snap["history"]:
            rec = HistoryRecord.from_json(json.dumps(d))
            eng.pending = (rec.x_i, rec.x_j)
            eng.apply_feedback(rec.winner, rec.c_i, rec.c_j, rec.auto_won)
        if snap.get("pending") is not None:
            xi, xj = snap["pending"]
            eng.pending = (np.array(xi), np.array(xj))
        return eng
