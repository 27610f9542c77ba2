"""Per-direction dependency analysis and layered transport sweeps.

For a fixed direction, interior edges with |omega . n| above a tolerance
induce an upwind -> downwind arc between the two adjacent triangles.
Peeling zero in-degree elements layer by layer yields an ordering in which
every element's upwind neighbors are solved before it; elements inside one
layer are mutually independent.
"""

import os
from dataclasses import dataclass

import numpy as np

from .dg_core import (
    EDGE_MASS_2,
    ElementBasis,
    assemble_local,
    element_basis,
    solve_local,
)
from .errors import StabilityError, SweepCycleError
from .mesh import BOUNDARY, TriangleMesh, classify_edges, opposite_local_edge
from .quadrature import TriangleRule, edge_rule, triangle_rule

EPS_N = 1e-12

# upwind-map sentinel for edges that carry no dependency (outflow/tangential)
NO_UPWIND = -2


@dataclass(frozen=True)
class SweepSchedule:
    """Layered solve order for one direction.

    layers partition 0..nt-1; every interior inflow edge's upwind neighbor
    sits in a strictly earlier layer. upwind[k, s] is the neighbor id across
    local edge s when that edge is inflow (BOUNDARY on the inflow boundary,
    NO_UPWIND otherwise). dot[k, s] = omega . n on local edge s with the
    outward sign for k.
    """

    omega: np.ndarray
    layers: tuple
    layer_of: np.ndarray  # (nt,)
    upwind: np.ndarray  # (nt, 3)
    inflow: np.ndarray  # (nt, 3) bool
    dot: np.ndarray  # (nt, 3)

    @property
    def n_layers(self) -> int:
        return len(self.layers)


def build_schedule(mesh: TriangleMesh, omega, eps_n: float = EPS_N) -> SweepSchedule:
    cls = classify_edges(mesh, omega, eps_n=eps_n)
    nt = mesh.n_triangles
    inflow = cls.inflow
    interior = mesh.tri_neighbors != BOUNDARY

    upwind = np.full((nt, 3), NO_UPWIND, dtype=np.int64)
    upwind[inflow] = BOUNDARY
    dep = inflow & interior
    upwind[dep] = mesh.tri_neighbors[dep]

    indeg = dep.sum(axis=1)
    outgoing = (cls.omega_dot_n > eps_n) & interior
    layer_of = np.full(nt, -1, dtype=np.int64)
    layers = []
    current = np.flatnonzero(indeg == 0)
    assigned = 0
    while current.size:
        layers.append(current)
        layer_of[current] = len(layers) - 1
        assigned += current.size
        ks, ss = np.nonzero(outgoing[current])
        targets = mesh.tri_neighbors[current[ks], ss]
        np.subtract.at(indeg, targets, 1)
        cand = np.unique(targets)
        current = cand[(indeg[cand] == 0) & (layer_of[cand] < 0)]
    if assigned != nt:
        stuck = np.flatnonzero(layer_of < 0)
        raise SweepCycleError(
            f"sweep dependency graph has a cycle touching {stuck.size} elements",
            elements=tuple(int(k) for k in stuck[:20]),
        )
    return SweepSchedule(
        omega=np.asarray(omega, dtype=float),
        layers=tuple(layers),
        layer_of=layer_of,
        upwind=upwind,
        inflow=inflow,
        dot=cls.omega_dot_n,
    )


def sweep_direction(
    mesh: TriangleMesh,
    schedule: SweepSchedule,
    omega_l,
    delta,
    sigma_t,
    source_l,
    inflow_data,
    out=None,
    basis: ElementBasis = None,
    tri_rule: TriangleRule = None,
    edge_npts: int = 3,
):
    """Solve one direction by walking the schedule element by element.

    Reference implementation built on the per-element assembly; the batched
    DirectionKernel below is the production path and is tested against this
    one. `source_l` and `inflow_data` are callables of (x, y). `delta` may
    be a scalar or a per-element array. Writes P1 coefficients into `out`
    (allocated when None) and returns it.
    """
    omega_l = np.asarray(omega_l, dtype=float)
    if basis is None:
        basis = element_basis(mesh)
    if out is None:
        out = np.zeros((mesh.n_triangles, 3))
    delta_k = np.broadcast_to(np.asarray(delta, dtype=float), (mesh.n_triangles,))

    def neighbor_trace(n):
        grad = basis.grad[n]
        p0 = mesh.vertices[mesh.triangles[n, 0]]
        cn = out[n]

        def trace(_s, x, y):
            disp = np.stack([x - p0[0], y - p0[1]], axis=-1)
            lam12 = disp @ grad[1:].T
            lam = np.stack([1.0 - lam12[..., 0] - lam12[..., 1], lam12[..., 0], lam12[..., 1]], axis=-1)
            return lam @ cn

        return trace

    for li, layer in enumerate(schedule.layers):
        for k in layer:
            inflow_local = np.flatnonzero(schedule.inflow[k])
            traces = {}
            for s in inflow_local:
                n = schedule.upwind[k, s]
                if n == BOUNDARY:
                    if inflow_data is None:
                        traces[s] = lambda _s, x, y: np.zeros(np.shape(x))
                    else:
                        traces[s] = lambda _s, x, y: inflow_data(x, y)
                else:
                    traces[s] = neighbor_trace(n)

            def upwind_trace(s, x, y):
                return traces[s](s, x, y)

            sys = assemble_local(
                mesh,
                basis,
                int(k),
                omega_l,
                float(delta_k[k]),
                sigma_t,
                inflow_local,
                upwind_trace,
                source_l,
                tri_rule=tri_rule,
                edge_npts=edge_npts,
            )
            try:
                out[k] = solve_local(sys, element=int(k))
            except StabilityError as err:
                raise StabilityError(
                    f"layer {li}: {err}", element=int(k), direction=err.direction
                ) from err
    return out


@dataclass(frozen=True)
class SpaceTables:
    """Direction-independent element data shared by all kernels on a mesh."""

    mesh: TriangleMesh
    basis: ElementBasis
    rule: TriangleRule
    points: np.ndarray  # (nt, nq, 2) physical quadrature points
    areaw: np.ndarray  # (nt, nq) area-scaled weights
    sigma_t: np.ndarray  # (nt, nq)
    opp_local: np.ndarray  # (nt, 3)
    edge_t: np.ndarray  # (ne_pts,) edge rule params
    edge_w: np.ndarray  # (ne_pts,)


def space_tables(
    mesh: TriangleMesh,
    sigma_t,
    basis: ElementBasis = None,
    tri_rule: TriangleRule = None,
    edge_npts: int = 4,
) -> SpaceTables:
    if basis is None:
        basis = element_basis(mesh)
    if tri_rule is None:
        tri_rule = triangle_rule(4)
    pts = np.einsum("qs,kst->kqt", tri_rule.points, mesh.vertices[mesh.triangles])
    st = np.asarray(sigma_t(pts[..., 0], pts[..., 1]), dtype=float)
    st = np.broadcast_to(st, pts.shape[:2])
    tq, tw = edge_rule(edge_npts)
    return SpaceTables(
        mesh=mesh,
        basis=basis,
        rule=tri_rule,
        points=pts,
        areaw=mesh.tri_area[:, None] * tri_rule.weights[None, :],
        sigma_t=st,
        opp_local=opposite_local_edge(mesh),
        edge_t=tq,
        edge_w=tw,
    )


@dataclass
class DirectionKernel:
    """Batched single-direction transport solve.

    Everything that does not change across source iterations is factored
    here: inverted local matrices, neighbor-trace coupling blocks, and the
    fixed right-hand side (volume source + inflow boundary data). Only the
    scattering part of the right-hand side is supplied per solve.
    """

    schedule: SweepSchedule
    delta_k: np.ndarray  # (nt,)
    d: np.ndarray  # (nt, 3) omega . grad(phi)
    inv_a: np.ndarray  # (nt, 3, 3)
    coup: np.ndarray  # (nt, 3, 3, 3) neighbor-coefficient -> rhs maps
    nbr_pad: np.ndarray  # (nt, 3) neighbor ids with BOUNDARY -> nt
    fixed_rhs: np.ndarray  # (nt, 3)
    bary: np.ndarray  # (nq, 3)

    def volume_rhs(self, qw: np.ndarray) -> np.ndarray:
        """RHS of a volume source given area-weighted point values (nt, nq)."""
        return qw @ self.bary + (self.delta_k * qw.sum(axis=1))[:, None] * self.d

    def run(self, scatter_rhs=None) -> np.ndarray:
        nt = self.d.shape[0]
        rhs = self.fixed_rhs if scatter_rhs is None else self.fixed_rhs + scatter_rhs
        c = np.zeros((nt + 1, 3))
        for layer in self.schedule.layers:
            b = rhs[layer] + np.einsum(
                "ksij,ksj->ki", self.coup[layer], c[self.nbr_pad[layer]]
            )
            c[layer] = np.einsum("kij,kj->ki", self.inv_a[layer], b)
        return c[:nt]


def build_kernel(
    tables: SpaceTables,
    schedule: SweepSchedule,
    delta,
    f_vals=None,
    inflow_data=None,
) -> DirectionKernel:
    """Assemble the batched kernel for one direction.

    f_vals: fixed volume source at the table's quadrature points (nt, nq),
    or None for zero. inflow_data: callable (x, y) for the inflow boundary
    trace, or None for homogeneous data.
    """
    mesh = tables.mesh
    nt = mesh.n_triangles
    omega = schedule.omega
    delta_k = np.broadcast_to(np.asarray(delta, dtype=float), (nt,)).copy()
    d = tables.basis.grad @ omega  # (nt, 3)
    bary = tables.rule.points

    test = bary[None, :, :] + delta_k[:, None, None] * d[:, None, :]  # (nt, nq, 3)
    trial = d[:, None, :] + tables.sigma_t[:, :, None] * bary[None, :, :]
    wtrial = tables.areaw[:, :, None] * trial
    a = np.einsum("kqj,kqi->kij", wtrial, test)

    inflow = schedule.inflow
    interior = mesh.tri_neighbors != BOUNDARY
    absdot = -schedule.dot  # positive on inflow edges
    elen = mesh.edge_length[mesh.tri_edges]

    coup = np.zeros((nt, 3, 3, 3))
    nbr_pad = np.where(mesh.tri_neighbors == BOUNDARY, nt, mesh.tri_neighbors)
    for s in range(3):
        m = inflow[:, s]
        if not m.any():
            continue
        w = elen[m, s] * absdot[m, s]
        i0, i1 = s, (s + 1) % 3
        a[m, i0, i0] += w * EDGE_MASS_2[0, 0]
        a[m, i0, i1] += w * EDGE_MASS_2[0, 1]
        a[m, i1, i0] += w * EDGE_MASS_2[1, 0]
        a[m, i1, i1] += w * EDGE_MASS_2[1, 1]

        mi = m & interior[:, s]
        if mi.any():
            k_idx = np.flatnonzero(mi)
            wi = elen[mi, s] * absdot[mi, s]
            sp = tables.opp_local[mi, s]
            j0, j1 = sp, (sp + 1) % 3
            # neighbor traces run against the edge param: phi_j0 = t, phi_j1 = 1-t
            coup[k_idx, s, i0, j0] = wi / 6.0
            coup[k_idx, s, i0, j1] = wi / 3.0
            coup[k_idx, s, i1, j0] = wi / 3.0
            coup[k_idx, s, i1, j1] = wi / 6.0

    det = np.linalg.det(a)
    scale = np.abs(a).reshape(nt, 9).max(axis=1)
    bad = np.abs(det) < 1e-20 * scale**3
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise StabilityError(
            f"near-singular local system at element {k} (|det|={abs(det[k]):.3e})",
            element=k,
        )
    inv_a = np.linalg.inv(a)

    fixed = np.zeros((nt, 3))
    kernel = DirectionKernel(
        schedule=schedule,
        delta_k=delta_k,
        d=d,
        inv_a=inv_a,
        coup=coup,
        nbr_pad=nbr_pad,
        fixed_rhs=fixed,
        bary=bary,
    )
    if f_vals is not None:
        fixed += kernel.volume_rhs(tables.areaw * f_vals)
    if inflow_data is not None:
        bmask = inflow & ~interior
        if bmask.any():
            tq, tw = tables.edge_t, tables.edge_w
            ks, ss = np.nonzero(bmask)
            p0 = mesh.vertices[mesh.triangles[ks, ss]]
            p1 = mesh.vertices[mesh.triangles[ks, (ss + 1) % 3]]
            pts = p0[:, None, :] + tq[None, :, None] * (p1 - p0)[:, None, :]
            g = np.asarray(inflow_data(pts[..., 0], pts[..., 1]), dtype=float)
            g = np.broadcast_to(g, pts.shape[:2])
            w = elen[ks, ss] * absdot[ks, ss]
            c0 = w * ((tw * (1.0 - tq))[None, :] * g).sum(axis=1)
            c1 = w * ((tw * tq)[None, :] * g).sum(axis=1)
            np.add.at(fixed, (ks, ss), c0)
            np.add.at(fixed, (ks, (ss + 1) % 3), c1)
    return kernel


def thread_count() -> int:
    """Worker count for the direction loop, from the RTE_THREADS variable."""
    raw = os.environ.get("RTE_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(n, 1)
