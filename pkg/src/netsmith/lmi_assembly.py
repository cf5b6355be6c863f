"""Augmented closed-loop matrices and delay-robust LMI assembly.

The predictor loop with the channel replaced by a pure sample delay
tau_k in [d_hat+tau_n_min, d_hat+tau_n_max] admits the compact model

    xi_{k+1} = A_tilde xi_k + A_d_tilde xi_{k - d_hat - tau_k^N}

over the stacked state xi = (x, x_H, x_F, x_C) of the plant, prediction
block, robustness filter, and controller realizations.  Two LMI
sufficiency tests for asymptotic stability of that model are assembled
here as constant matrices with named symmetric unknowns:

  lifted   one large G matrix coupling d_hat+tau_n_max+1 stacked state
           copies; unknowns P (stacked) and S.
  compact  an 8 n_xi block inequality with unknowns P, Q1, Q2, R1, R2, S,
           all n_xi x n_xi.

Solving the LMIs is delegated to external SDP tooling; this module
builds, exports, and verifies, but does not solve.
"""
from __future__ import annotations

from dataclasses import dataclass
import json

import numpy as np

from .lti_core import NumericError, StateSpace, realize
from .smith_design import PredictorDesign

VARIANTS = ("lifted", "compact")
FEAS_EIG_TOL = 1e-9
DIRECT_TERM_TOL = 1e-9


@dataclass(frozen=True)
class AugmentedModel:
    """Constant matrices of the sample-delay closed-loop model.

    input_reference, input_disturbance, and output_row extend the bare
    stability model for simulation cross-checks: the reference column
    injects the prefiltered reference into the tracking error, the
    disturbance column adds a plant-input disturbance, and output_row
    reads the delay-free plant output (the measured output lags it by
    d_hat samples).
    """
    A_tilde: np.ndarray
    A_d_tilde: np.ndarray
    n_xi: int
    d_hat: int
    tau_n_min: int
    tau_n_max: int
    block_orders: tuple
    input_reference: np.ndarray
    input_disturbance: np.ndarray
    output_row: np.ndarray

    def __post_init__(self):
        if self.n_xi != sum(self.block_orders):
            raise ValueError("n_xi must equal the sum of the block orders")
        n = self.block_orders[0]
        tail = self.A_d_tilde[:, n:]
        if tail.size and np.any(tail != 0.0):
            raise ValueError("delayed-state matrix must only act on the plant block")


def _strictly_proper(ss: StateSpace, what: str) -> StateSpace:
    if abs(ss.d) > DIRECT_TERM_TOL:
        raise ValueError(f"{what} must be strictly proper (no direct feedthrough)")
    return ss


def assemble_augmented(design: PredictorDesign) -> AugmentedModel:
    """Realize P_hat, H, F, C and stack them into (A_tilde, A_d_tilde).

    The plant and prediction block must be strictly proper; the filter
    and controller may carry direct terms d_F, d_C.  A static plant
    (order 0) is rejected since the loop state would be empty.
    """
    sp = _strictly_proper(realize(design.plant_nominal), "plant")
    sh = _strictly_proper(realize(design.predictor_block), "prediction block")
    sf = realize(design.filter)
    sc = realize(design.controller)
    n, nh, nf, nc = sp.order, sh.order, sf.order, sc.order
    if n == 0:
        raise ValueError("plant realization has no state; a static plant is not supported")
    nxi = n + nh + nf + nc
    off = np.cumsum([0, n, nh, nf, nc])
    s = [slice(off[i], off[i + 1]) for i in range(4)]

    A = np.zeros((nxi, nxi))
    A[s[0], s[0]] = sp.A
    A[s[0], s[1]] = -np.outer(sp.b, sc.d * sh.c)
    A[s[0], s[2]] = -np.outer(sp.b, sc.d * sf.c)
    A[s[0], s[3]] = np.outer(sp.b, sc.c)
    A[s[1], s[1]] = sh.A - np.outer(sh.b, sc.d * sh.c)
    A[s[1], s[2]] = -np.outer(sh.b, sc.d * sf.c)
    A[s[1], s[3]] = np.outer(sh.b, sc.c)
    A[s[2], s[2]] = sf.A
    A[s[3], s[1]] = -np.outer(sc.b, sh.c)
    A[s[3], s[2]] = -np.outer(sc.b, sf.c)
    A[s[3], s[3]] = sc.A

    Ad = np.zeros((nxi, nxi))
    Ad[s[0], s[0]] = -np.outer(sp.b, sc.d * sf.d * sp.c)
    Ad[s[1], s[0]] = -np.outer(sh.b, sc.d * sf.d * sp.c)
    Ad[s[2], s[0]] = np.outer(sf.b, sp.c)
    Ad[s[3], s[0]] = -np.outer(sc.b, sf.d * sp.c)

    b_ref = np.zeros(nxi)
    b_ref[s[0]] = sp.b * sc.d
    b_ref[s[1]] = sh.b * sc.d
    b_ref[s[3]] = sc.b
    b_dist = np.zeros(nxi)
    b_dist[s[0]] = sp.b
    c_row = np.zeros(nxi)
    c_row[s[0]] = sp.c

    return AugmentedModel(A_tilde=A, A_d_tilde=Ad, n_xi=nxi,
                          d_hat=design.d_hat, tau_n_min=design.tau_n_min,
                          tau_n_max=design.tau_n_max,
                          block_orders=(n, nh, nf, nc),
                          input_reference=b_ref, input_disturbance=b_dist,
                          output_row=c_row)


@dataclass(frozen=True)
class LmiProblem:
    """Assembled LMI data: constant blocks plus named symmetric unknowns.

    variable_count follows the published closed-form size formula for the
    variant; free_parameter_count is the generic count sum over unknowns
    of m(m+1)/2.  For the lifted variant the two agree; for the compact
    variant the quoted formula n_xi^3 + 2 n_xi^2 + n_xi counts solver
    variables differently and both numbers are reported.
    """
    variant: str
    gamma: float
    model: AugmentedModel
    unknowns: dict
    blocks: dict
    side: int
    variable_count: int
    free_parameter_count: int

    def block_csv(self) -> dict:
        """Dense CSV text per constant block, 17 significant digits."""
        out = {}
        for name, mat in self.blocks.items():
            rows = [",".join(f"{v:.17g}" for v in row) for row in np.atleast_2d(mat)]
            out[name] = "\n".join(rows) + "\n"
        return out


def _generic_count(unknowns: dict) -> int:
    return sum(m * (m + 1) // 2 for m in unknowns.values())


def lifted_variable_count(n_xi: int, d_hat: int, tau_n_max: int) -> int:
    """Published size formula for the lifted variant; equals the generic
    symmetric count of P ((d_hat+tau_n_max+1)n_xi) plus S (n_xi)."""
    D = d_hat + tau_n_max
    return round(0.5 * ((D**2 + 2 * D + 2) * n_xi**2) + 0.5 * (D + 2) * n_xi)


def compact_variable_count(n_xi: int) -> int:
    """Published size formula for the compact variant."""
    return n_xi**3 + 2 * n_xi**2 + n_xi


def build_lmi(model: AugmentedModel, variant: str, gamma: float) -> LmiProblem:
    """Assemble the constant matrices of one LMI variant.

    gamma in (0,1) is the contraction rate of the candidate Lyapunov
    certificate.  The lifted variant needs tau_n_max >= tau_n_min + 1
    (its inner zero block has width tau_n_max - tau_n_min - 1); the
    compact variant only needs tau_n_max >= tau_n_min.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown LMI variant {variant!r}; expected one of {VARIANTS}")
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie strictly inside (0,1); got {gamma}")
    if model.tau_n_max < model.tau_n_min:
        raise ValueError("negative block width: tau_n_max < tau_n_min")
    if model.d_hat + model.tau_n_min < 1:
        raise ValueError("the compensated delay d_hat + tau_n_min must be at least 1")
    n = model.n_xi
    A = model.A_tilde
    Ad = model.A_d_tilde
    half = 0.5 * Ad
    spread = 0.5 * (model.tau_n_max - model.tau_n_min) * Ad

    if variant == "lifted":
        inner = model.tau_n_max - model.tau_n_min - 1
        if inner < 0:
            raise ValueError(
                "lifted variant needs tau_n_max >= tau_n_min + 1 "
                "(inner zero block would have negative width)")
        D = model.d_hat + model.tau_n_max
        side = (D + 2) * n
        psi_cols = D * n
        G = np.zeros((side, side))

        def fill_psi(row0, head):
            G[row0:row0 + n, 0:n] = head
            c = (model.d_hat + model.tau_n_min) * n
            G[row0:row0 + n, c:c + n] = half
            G[row0:row0 + n, psi_cols:psi_cols + n] = half
            G[row0:row0 + n, psi_cols + n:psi_cols + 2 * n] = spread

        fill_psi(0, A)
        G[n:n + D * n, 0:D * n] = np.eye(D * n)
        fill_psi((D + 1) * n, A - np.eye(n))
        unknowns = {"P": (D + 1) * n, "S": n}
        blocks = {"G": G}
        count = lifted_variable_count(n, model.d_hat, model.tau_n_max)
    else:
        side = 8 * n
        phi2 = np.hstack([A, half, half, spread])
        phi3 = np.hstack([A - np.eye(n), half, half, spread])
        unknowns = {"P": n, "Q1": n, "Q2": n, "R1": n, "R2": n, "S": n}
        blocks = {"Phi2": phi2, "Phi3": phi3}
        count = compact_variable_count(n)

    return LmiProblem(variant=variant, gamma=gamma, model=model,
                      unknowns=unknowns, blocks=blocks, side=side,
                      variable_count=count,
                      free_parameter_count=_generic_count(unknowns))


def assemble_matrix(problem: LmiProblem, candidates: dict) -> np.ndarray:
    """Substitute candidate unknowns and return the full LMI matrix."""
    for name, dim in problem.unknowns.items():
        mat = candidates.get(name)
        if mat is None:
            raise ValueError(f"missing candidate for unknown {name!r}")
        if np.shape(mat) != (dim, dim):
            raise ValueError(
                f"candidate {name!r} has shape {np.shape(mat)}; expected ({dim}, {dim})")
    gamma = problem.gamma
    model = problem.model
    n = model.n_xi
    if problem.variant == "lifted":
        P = np.asarray(candidates["P"], dtype=float)
        S = np.asarray(candidates["S"], dtype=float)
        G = problem.blocks["G"]
        theta1 = _blkdiag(P, S)
        theta2 = _blkdiag(P, gamma**2 * S)
        M = G.T @ theta1 @ G - theta2
    else:
        P, Q1, Q2, R1, R2, S = (np.asarray(candidates[k], dtype=float)
                                for k in ("P", "Q1", "Q2", "R1", "R2", "S"))
        phi2 = problem.blocks["Phi2"]
        phi3 = problem.blocks["Phi3"]
        z = np.zeros((n, n))
        phi1 = np.block([
            [-P + Q1 + Q2 - R1 - R2, R1, R2, z],
            [R1.T, -Q1 - R1, z, z],
            [R2.T, z, -Q2 - R2, z],
            [z, z, z, -gamma**2 * S],
        ])
        psi = np.hstack([
            phi2.T @ P,
            (model.d_hat + model.tau_n_min) * (phi3.T @ R1),
            (model.d_hat + model.tau_n_max) * (phi3.T @ R2),
            phi3.T @ S,
        ])
        M = np.block([[phi1, psi],
                      [psi.T, _blkdiag(-P, -R1, -R2, -S)]])
    return 0.5 * (M + M.T)


def _blkdiag(*mats) -> np.ndarray:
    side = sum(m.shape[0] for m in mats)
    out = np.zeros((side, side))
    at = 0
    for m in mats:
        k = m.shape[0]
        out[at:at + k, at:at + k] = m
        at += k
    return out


@dataclass(frozen=True)
class FeasibilityReport:
    """Eigenvalue check of substituted candidates: feasible means the
    assembled matrix is negative definite and every candidate positive
    definite, both with margin FEAS_EIG_TOL."""
    feasible: bool
    lambda_max: float
    candidate_min_eigs: dict

    def to_dict(self) -> dict:
        return {"feasible": self.feasible, "lambda_max": self.lambda_max,
                "candidate_min_eigs": dict(self.candidate_min_eigs)}


def verify_candidate(problem: LmiProblem, candidates: dict) -> FeasibilityReport:
    """Check a set of candidate Lyapunov matrices by eigenvalue test."""
    M = assemble_matrix(problem, candidates)
    lam_max = float(np.linalg.eigvalsh(M)[-1])
    mins = {}
    for name in problem.unknowns:
        C = np.asarray(candidates[name], dtype=float)
        mins[name] = float(np.linalg.eigvalsh(0.5 * (C + C.T))[0])
    feasible = lam_max < -FEAS_EIG_TOL and all(v > FEAS_EIG_TOL for v in mins.values())
    return FeasibilityReport(feasible=feasible, lambda_max=lam_max,
                             candidate_min_eigs=mins)


def export_lmi(problem: LmiProblem, path) -> None:
    """Write the problem as a self-describing JSON document.

    The document lists every constant block dense, each unknown's
    symmetric dimension, gamma, and the delay bounds; exporting an
    imported problem reproduces the file byte for byte.
    """
    with open(path, "w") as fh:
        fh.write(problem_document(problem))


def problem_document(problem: LmiProblem) -> str:
    model = problem.model
    doc = {
        "kind": "delay-robust-lmi",
        "variant": problem.variant,
        "gamma": problem.gamma,
        "side": problem.side,
        "n_xi": model.n_xi,
        "d_hat": model.d_hat,
        "tau_n_min": model.tau_n_min,
        "tau_n_max": model.tau_n_max,
        "block_orders": list(model.block_orders),
        "unknowns": {k: v for k, v in sorted(problem.unknowns.items())},
        "variable_count": problem.variable_count,
        "free_parameter_count": problem.free_parameter_count,
        "A_tilde": model.A_tilde.tolist(),
        "A_d_tilde": model.A_d_tilde.tolist(),
        "input_reference": model.input_reference.tolist(),
        "input_disturbance": model.input_disturbance.tolist(),
        "output_row": model.output_row.tolist(),
        "blocks": {k: np.asarray(v).tolist() for k, v in sorted(problem.blocks.items())},
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def import_lmi(path) -> LmiProblem:
    """Rebuild an LmiProblem from an exported JSON document."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("kind") != "delay-robust-lmi":
        raise ValueError("not an LMI export document")
    model = AugmentedModel(
        A_tilde=np.array(doc["A_tilde"], dtype=float),
        A_d_tilde=np.array(doc["A_d_tilde"], dtype=float),
        n_xi=int(doc["n_xi"]),
        d_hat=int(doc["d_hat"]),
        tau_n_min=int(doc["tau_n_min"]),
        tau_n_max=int(doc["tau_n_max"]),
        block_orders=tuple(doc["block_orders"]),
        input_reference=np.array(doc["input_reference"], dtype=float),
        input_disturbance=np.array(doc["input_disturbance"], dtype=float),
        output_row=np.array(doc["output_row"], dtype=float),
    )
    return LmiProblem(
        variant=doc["variant"], gamma=float(doc["gamma"]), model=model,
        unknowns={k: int(v) for k, v in doc["unknowns"].items()},
        blocks={k: np.array(v, dtype=float) for k, v in doc["blocks"].items()},
        side=int(doc["side"]),
        variable_count=int(doc["variable_count"]),
        free_parameter_count=int(doc["free_parameter_count"]),
    )
