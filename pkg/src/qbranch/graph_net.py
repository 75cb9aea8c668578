"""Encode-process-decode graph network Q-function in numpy.

Forward evaluation records a tape; :func:`backward` runs reverse mode over it
by hand.  Everything is float64.

Updaters:

* encoder (independent per entity) and decoder: ``LN(relu(x W + b))``
* core edge/vertex/global: ``LN(relu(relu(x W1 + b1) W2 + b2))``
* output projection: ``h W + b`` on variable vertices, no activation

Core inputs are the encoder output concatenated with the previous core output
(zeros before the first iteration).  Edge inputs are (global, edge, sender,
receiver); vertex inputs (global, vertex, sum of incoming edges); global inputs
(global, mean edge, mean vertex).  Empty sums and means are zero vectors.
"""
from __future__ import annotations

import io
import json
import struct
import zlib
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import gnn_ops as ops
from .state_graph import StateGraph


@dataclass(frozen=True)
class GraphNetConfig:
    vertex_in: int = 2
    edge_in: int = 2
    global_in: int = 1
    encoder_dim: int = 32
    core_vertex: int = 64
    core_edge: int = 64
    core_global: int = 32
    core_hidden: int = 64
    decoder_dim: int = 32
    n_actions: int = 2
    iterations: int = 4
    ln_eps: float = 1e-5

    @property
    def core_in(self) -> dict[str, int]:
        """Input widths of the core updaters (after encoder concatenation)."""
        e = self.encoder_dim + self.core_edge
        v = self.encoder_dim + self.core_vertex
        u = self.encoder_dim + self.core_global
        return {"edge": u + e + 2 * v, "vertex": u + v + self.core_edge,
                "global": u + self.core_edge + self.core_vertex}


def param_layout(cfg: GraphNetConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Parameter names and shapes, in checkpoint order."""
    enc = cfg.encoder_dim
    layout = []

    def dense(prefix, n_in, n_out):
        layout.extend([(f"{prefix}.W", (n_in, n_out)), (f"{prefix}.b", (n_out,)),
                       (f"{prefix}.ln_g", (n_out,)), (f"{prefix}.ln_b", (n_out,))])

    def mlp(prefix, n_in, n_out):
        layout.extend([(f"{prefix}.W1", (n_in, cfg.core_hidden)), (f"{prefix}.b1", (cfg.core_hidden,)),
                       (f"{prefix}.W2", (cfg.core_hidden, n_out)), (f"{prefix}.b2", (n_out,)),
                       (f"{prefix}.ln_g", (n_out,)), (f"{prefix}.ln_b", (n_out,))])

    dense("encoder.edge", cfg.edge_in, enc)
    dense("encoder.vertex", cfg.vertex_in, enc)
    dense("encoder.global", cfg.global_in, enc)
    ci = cfg.core_in
    mlp("core.edge", ci["edge"], cfg.core_edge)
    mlp("core.vertex", ci["vertex"], cfg.core_vertex)
    mlp("core.global", ci["global"], cfg.core_global)
    dense("decoder.vertex", cfg.core_vertex, cfg.decoder_dim)
    layout.extend([("output.W", (cfg.decoder_dim, cfg.n_actions)), ("output.b", (cfg.n_actions,))])
    return layout


class GraphNetParams:
    """Named parameter arrays with a fixed layout."""

    def __init__(self, config: GraphNetConfig, arrays: dict[str, np.ndarray]):
        self.config = config
        layout = param_layout(config)
        missing = {n for n, _ in layout} - set(arrays)
        if missing:
            raise ValueError(f"missing parameters: {sorted(missing)}")
        self.arrays = {}
        for name, shape in layout:
            a = np.asarray(arrays[name], dtype=np.float64)
            if a.shape != shape:
                raise ValueError(f"{name}: shape {a.shape}, expected {shape}")
            self.arrays[name] = a

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def items(self):
        return self.arrays.items()

    def names(self) -> list[str]:
        return list(self.arrays)

    def copy(self) -> "GraphNetParams":
        return GraphNetParams(self.config, {k: v.copy() for k, v in self.arrays.items()})

    @property
    def size(self) -> int:
        return sum(a.size for a in self.arrays.values())

    def bit_equal(self, other: "GraphNetParams") -> bool:
        return self.config == other.config and all(
            self.arrays[k].tobytes() == other.arrays[k].tobytes() for k in self.arrays)


def init_params(seed: int, config: GraphNetConfig | None = None) -> GraphNetParams:
    """Fan-in scaled uniform weights and biases; layer-norm gain 1, bias 0."""
    config = config or GraphNetConfig()
    rng = np.random.default_rng(seed)
    arrays = {}
    fan_in = None
    for name, shape in param_layout(config):
        leaf = name.rsplit(".", 1)[1]
        if leaf == "ln_g":
            arrays[name] = np.ones(shape)
        elif leaf == "ln_b":
            arrays[name] = np.zeros(shape)
        else:
            if leaf.startswith("W"):
                fan_in = shape[0]
            bound = 1.0 / np.sqrt(fan_in)
            arrays[name] = rng.uniform(-bound, bound, size=shape)
    return GraphNetParams(config, arrays)


# -- building blocks ----------------------------------------------------------

class _Counter:
    __slots__ = ("macs",)

    def __init__(self):
        self.macs = 0

    def mm(self, a, b):
        self.macs += a.shape[0] * a.shape[1] * b.shape[1]
        return a @ b


def _dense_fwd(p, prefix, x, eps, ctr):
    z = ctr.mm(x, p[prefix + ".W"])
    y, xhat, inv, mask = ops.bias_relu_ln(z, p[prefix + ".b"], p[prefix + ".ln_g"],
                                          p[prefix + ".ln_b"], eps)
    return y, (x, mask, (xhat, inv))


def _ln_relu_bwd(p, prefix, dy, mask, ln, grads):
    xhat, inv = ln
    return ops.ln_relu_bwd(np.ascontiguousarray(dy), p[prefix + ".ln_g"], xhat, inv, mask,
                           grads[prefix + ".ln_g"], grads[prefix + ".ln_b"])


def _dense_bwd(p, prefix, dy, cache, grads):
    x, mask, ln = cache
    dz = _ln_relu_bwd(p, prefix, dy, mask, ln, grads)
    grads[prefix + ".W"] += x.T @ dz
    grads[prefix + ".b"] += dz.sum(axis=0)
    return dz @ p[prefix + ".W"].T


def _mlp_tail_fwd(p, prefix, z1, eps, ctr):
    """Second half of a core MLP given the hidden pre-activation (bias not yet added)."""
    h, m1 = ops.bias_relu(z1, p[prefix + ".b1"])
    z2 = ctr.mm(h, p[prefix + ".W2"])
    y, xhat, inv, m2 = ops.bias_relu_ln(z2, p[prefix + ".b2"], p[prefix + ".ln_g"],
                                        p[prefix + ".ln_b"], eps)
    return y, (m1, h, m2, (xhat, inv))


def _mlp_tail_bwd(p, prefix, dy, cache, grads):
    m1, h, m2, ln = cache
    dz2 = _ln_relu_bwd(p, prefix, dy, m2, ln, grads)
    grads[prefix + ".W2"] += h.T @ dz2
    grads[prefix + ".b2"] += dz2.sum(axis=0)
    return (dz2 @ p[prefix + ".W2"].T) * m1


def _mlp_fwd(p, prefix, x, eps, ctr):
    z1 = ctr.mm(x, p[prefix + ".W1"])
    y, tail = _mlp_tail_fwd(p, prefix, z1, eps, ctr)
    return y, (x, tail)


def _mlp_bwd(p, prefix, dy, cache, grads):
    x, tail = cache
    dz1 = _mlp_tail_bwd(p, prefix, dy, tail, grads)
    grads[prefix + ".W1"] += x.T @ dz1
    grads[prefix + ".b1"] += dz1.sum(axis=0)
    return dz1 @ p[prefix + ".W1"].T


def _incidence(graph: StateGraph):
    """Sparse (V, E) sender and receiver incidence matrices, cached on the graph."""
    inc = graph.cache.get("incidence")
    if inc is None:
        V, E = graph.num_vertices, graph.num_edges
        ones = np.ones(E)
        cols = np.arange(E)
        S = sp.csr_matrix((ones, (graph.senders, cols)), shape=(V, E))
        R = sp.csr_matrix((ones, (graph.receivers, cols)), shape=(V, E))
        inc = graph.cache["incidence"] = (S, R)
    return inc


# -- forward / backward -------------------------------------------------------

@dataclass
class ForwardTape:
    config: GraphNetConfig
    graph: StateGraph
    encoder: tuple
    iterations: list
    decoder: tuple
    macs: int


def forward(params: GraphNetParams, graph: StateGraph):
    """Q-values (num_var_vertices, 2) and the tape for :func:`backward`."""
    cfg = params.config
    p = params.arrays
    eps = cfg.ln_eps
    ctr = _Counter()
    V, E = graph.num_vertices, graph.num_edges
    nv = graph.num_var_vertices
    S, R = _incidence(graph)
    s, r = graph.senders, graph.receivers

    e0, enc_e = _dense_fwd(p, "encoder.edge", graph.edge_features, eps, ctr)
    v0, enc_v = _dense_fwd(p, "encoder.vertex", graph.vertex_features, eps, ctr)
    u0, enc_u = _dense_fwd(p, "encoder.global", graph.global_features.reshape(1, -1), eps, ctr)

    enc = cfg.encoder_dim
    ue = (enc + cfg.core_global, enc + cfg.core_global + enc + cfg.core_edge)
    W1 = p["core.edge.W1"]
    vin = enc + cfg.core_vertex
    W_u, W_e = W1[:ue[0]], W1[ue[0]:ue[1]]
    W_sr = np.hstack([W1[ue[1]:ue[1] + vin], W1[ue[1] + vin:]])
    H = cfg.core_hidden

    e_prev = np.zeros((E, cfg.core_edge))
    v_prev = np.zeros((V, cfg.core_vertex))
    u_prev = np.zeros((1, cfg.core_global))
    tape_iters = []
    for _ in range(cfg.iterations):
        Xe = np.hstack([e0, e_prev])
        Xv = np.hstack([v0, v_prev])
        xu = np.hstack([u0, u_prev])
        AB = ctr.mm(Xv, W_sr)
        z1 = ctr.mm(Xe, W_e)
        z1 += AB[s, :H]
        z1 += AB[r, H:]
        z1 += ctr.mm(xu, W_u)
        e_new, edge_tail = _mlp_tail_fwd(p, "core.edge", z1, eps, ctr)

        agg = R @ e_new
        ctr.macs += E * cfg.core_edge
        xv_in = np.hstack([np.broadcast_to(xu, (V, xu.shape[1])), Xv, agg])
        v_new, vert = _mlp_fwd(p, "core.vertex", xv_in, eps, ctr)

        me = e_new.mean(axis=0, keepdims=True) if E else np.zeros((1, cfg.core_edge))
        mv = v_new.mean(axis=0, keepdims=True) if V else np.zeros((1, cfg.core_vertex))
        ctr.macs += E * cfg.core_edge + V * cfg.core_vertex
        u_new, glob = _mlp_fwd(p, "core.global", np.hstack([xu, me, mv]), eps, ctr)

        tape_iters.append((Xe, Xv, xu, edge_tail, vert, glob))
        e_prev, v_prev, u_prev = e_new, v_new, u_new

    dec, dec_cache = _dense_fwd(p, "decoder.vertex", v_prev[:nv], eps, ctr)
    q = ctr.mm(dec, p["output.W"]) + p["output.b"]
    tape = ForwardTape(cfg, graph, (enc_e, enc_v, enc_u), tape_iters, (dec_cache, dec), ctr.macs)
    return q, tape


def q_values(params: GraphNetParams, graph: StateGraph) -> np.ndarray:
    return forward(params, graph)[0]


def zero_grads(params: GraphNetParams) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in params.items()}


def backward(params: GraphNetParams, tape: ForwardTape, grad_q: np.ndarray,
             grads: dict[str, np.ndarray] | None = None) -> dict[str, np.ndarray]:
    """Gradients of ``sum(grad_q * Q)`` w.r.t. every parameter.

    When ``grads`` is given the result is accumulated into it.
    """
    cfg = params.config
    if tape.config != cfg:
        raise ValueError("tape was recorded with a different network configuration")
    graph = tape.graph
    nv = graph.num_var_vertices
    grad_q = np.asarray(grad_q, dtype=np.float64)
    if grad_q.shape != (nv, cfg.n_actions):
        raise ValueError(f"grad_q has shape {grad_q.shape}, expected {(nv, cfg.n_actions)}")
    p = params.arrays
    if grads is None:
        grads = zero_grads(params)
    V, E = graph.num_vertices, graph.num_edges
    S, R = _incidence(graph)
    s, r = graph.senders, graph.receivers
    enc = cfg.encoder_dim
    H = cfg.core_hidden

    dec_cache, dec = tape.decoder
    grads["output.W"] += dec.T @ grad_q
    grads["output.b"] += grad_q.sum(axis=0)
    dv_next = np.zeros((V, cfg.core_vertex))
    dv_next[:nv] = _dense_bwd(p, "decoder.vertex", grad_q @ p["output.W"].T, dec_cache, grads)
    de_next = np.zeros((E, cfg.core_edge))
    du_next = np.zeros((1, cfg.core_global))
    de0 = np.zeros((E, enc))
    dv0 = np.zeros((V, enc))
    du0 = np.zeros((1, enc))

    ue0 = enc + cfg.core_global
    ue1 = ue0 + enc + cfg.core_edge
    vin = enc + cfg.core_vertex
    W1 = p["core.edge.W1"]
    W_u, W_e = W1[:ue0], W1[ue0:ue1]
    W_s, W_r = W1[ue1:ue1 + vin], W1[ue1 + vin:]
    gW1 = grads["core.edge.W1"]

    for Xe, Xv, xu, edge_tail, vert, glob in reversed(tape.iterations):
        dxg = _mlp_bwd(p, "core.global", du_next, glob, grads)
        nu = xu.shape[1]
        dxu = dxg[:, :nu].copy()
        dme = dxg[:, nu:nu + cfg.core_edge]
        dmv = dxg[:, nu + cfg.core_edge:]
        dv_new = dv_next + dmv / V if V else dv_next
        de_new = de_next + dme / E if E else de_next

        dxv = _mlp_bwd(p, "core.vertex", dv_new, vert, grads)
        dxu += dxv[:, :nu].sum(axis=0, keepdims=True)
        dXv = dxv[:, nu:nu + vin].copy()
        de_new = de_new + dxv[:, nu + vin:][r]

        dz1 = _mlp_tail_bwd(p, "core.edge", de_new, edge_tail, grads)
        dz1_sum = dz1.sum(axis=0, keepdims=True)
        grads["core.edge.b1"] += dz1_sum[0]
        gW1[:ue0] += xu.T @ dz1_sum
        dxu += dz1_sum @ W_u.T
        gW1[ue0:ue1] += Xe.T @ dz1
        dXe = dz1 @ W_e.T
        dA = S @ dz1
        dB = R @ dz1
        gW1[ue1:ue1 + vin] += Xv.T @ dA
        gW1[ue1 + vin:] += Xv.T @ dB
        dXv += dA @ W_s.T + dB @ W_r.T

        de0 += dXe[:, :enc]
        de_next = dXe[:, enc:]
        dv0 += dXv[:, :enc]
        dv_next = dXv[:, enc:]
        du0 += dxu[:, :enc]
        du_next = dxu[:, enc:]

    enc_e, enc_v, enc_u = tape.encoder
    _dense_bwd(p, "encoder.edge", de0, enc_e, grads)
    _dense_bwd(p, "encoder.vertex", dv0, enc_v, grads)
    _dense_bwd(p, "encoder.global", du0, enc_u, grads)
    return grads


def relu_pattern(tape: ForwardTape) -> bytes:
    """Packed ReLU on/off pattern of a forward pass (used to detect kinks in finite differences)."""
    masks = []

    def dense(cache):
        masks.append(cache[1])

    def tail(cache):
        masks.extend([cache[0], cache[2]])

    for c in tape.encoder:
        dense(c)
    for _, _, _, edge_tail, vert, glob in tape.iterations:
        tail(edge_tail)
        tail(vert[1])
        tail(glob[1])
    dense(tape.decoder[0])
    return b"".join(np.packbits(m.ravel()).tobytes() for m in masks)


def count_forward_macs(params: GraphNetParams, graph: StateGraph) -> int:
    return forward(params, graph)[1].macs


# -- checkpoints --------------------------------------------------------------

MAGIC = b"QBGNET\x00\x01"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def save_params(params: GraphNetParams, path) -> None:
    """Write a checkpoint.

    Layout (little endian): magic (8 bytes), format version (u32), header
    length (u32) and JSON header with the network dimensions, block count (u32),
    then per block: name length (u16), name, ndim (u8), dims (u32 each) and the
    float64 data in row-major order; finally a CRC32 (u32) of all prior bytes.
    """
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", FORMAT_VERSION))
    header = json.dumps(asdict(params.config), sort_keys=True).encode()
    buf.write(struct.pack("<I", len(header)))
    buf.write(header)
    buf.write(struct.pack("<I", len(params.arrays)))
    for name, a in params.items():
        nb = name.encode()
        buf.write(struct.pack("<H", len(nb)))
        buf.write(nb)
        buf.write(struct.pack("<B", a.ndim))
        buf.write(struct.pack(f"<{a.ndim}I", *a.shape))
        buf.write(np.ascontiguousarray(a, dtype="<f8").tobytes())
    data = buf.getvalue()
    Path(path).write_bytes(data + struct.pack("<I", zlib.crc32(data)))


def load_params(path, expected: GraphNetConfig | None = None) -> GraphNetParams:
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC) + 4 or data[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a graph-net checkpoint")
    version = struct.unpack_from("<I", data, len(MAGIC))[0]
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    if len(data) < len(MAGIC) + 12:
        raise CheckpointError(f"{path}: truncated checkpoint")
    body, crc = data[:-4], struct.unpack("<I", data[-4:])[0]
    if zlib.crc32(body) != crc:
        raise CheckpointError(f"{path}: checksum mismatch (truncated or corrupt file)")
    off = len(MAGIC) + 4
    (hlen,) = struct.unpack_from("<I", body, off)
    off += 4
    config = GraphNetConfig(**json.loads(body[off:off + hlen]))
    off += hlen
    if expected is not None and config != expected:
        raise CheckpointError(f"{path}: dimension mismatch: file has {config}, expected {expected}")
    (nblocks,) = struct.unpack_from("<I", body, off)
    off += 4
    arrays = {}
    for _ in range(nblocks):
        (nlen,) = struct.unpack_from("<H", body, off)
        off += 2
        name = body[off:off + nlen].decode()
        off += nlen
        (ndim,) = struct.unpack_from("<B", body, off)
        off += 1
        shape = struct.unpack_from(f"<{ndim}I", body, off)
        off += 4 * ndim
        count = int(np.prod(shape)) if ndim else 1
        arrays[name] = np.frombuffer(body, dtype="<f8", count=count, offset=off).reshape(shape).copy()
        off += 8 * count
    if off != len(body):
        raise CheckpointError(f"{path}: trailing bytes after parameter blocks")
    expected_layout = param_layout(config)
    if [(n, tuple(arrays[n].shape)) for n in arrays] != expected_layout:
        raise CheckpointError(f"{path}: parameter blocks do not match the declared dimensions")
    return GraphNetParams(config, arrays)
