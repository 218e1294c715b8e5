"""Plain-text and binary artifacts: traces, PGM snapshots, graphs, predictions."""
import csv
import math

import numpy as np
from scipy import sparse


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))  # shortest round-trip representation
    return str(v)


def write_rows_csv(path, rows, columns=None):
    """Write dict rows with a header; missing cells are left empty."""
    rows = list(rows)
    if columns is None:
        columns = []
        for r in rows:
            for key in r:
                if key not in columns:
                    columns.append(key)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) if c in r else "" for c in columns])
    return columns


def write_trace_csv(path, trace):
    return write_rows_csv(path, trace.records, trace.columns)


def read_csv_columns(path):
    """Read a numeric CSV into ``{column: np.ndarray}`` (non-numeric columns kept as str)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    out = {}
    for j, name in enumerate(header):
        col = [r[j] for r in body]
        try:
            out[name] = np.array([float(c) if c != "" else math.nan for c in col])
        except ValueError:
            out[name] = np.array(col)
    return out


def to_image(u, vmin=-1.0, vmax=1.0):
    """8-bit image of a 2D field (or the middle z-slice of a 3D one)."""
    u = np.asarray(u, dtype=float)
    if u.ndim == 3:
        u = u[:, :, u.shape[2] // 2]
    if u.ndim != 2:
        raise ValueError("snapshots need a 2D or 3D field")
    scaled = (np.clip(u, vmin, vmax) - vmin) / (vmax - vmin)
    return np.round(255.0 * scaled).astype(np.uint8)


def write_pgm(path, u, vmin=-1.0, vmax=1.0):
    img = to_image(u, vmin, vmax)
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (img.shape[1], img.shape[0]))
        fh.write(img.tobytes())


def read_pgm(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    parts = raw.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM file")
    w, h, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 255:
        raise ValueError("only 8-bit PGM is supported")
    return np.frombuffer(parts[4][: w * h], dtype=np.uint8).reshape(h, w)


def write_graph_coo(path, graph):
    """Header ``N nnz`` then one ``i j w`` line per stored entry."""
    W = graph.weights.tocoo()
    order = np.lexsort((W.col, W.row))
    with open(path, "w") as fh:
        fh.write(f"{graph.N} {W.nnz}\n")
        for i, j, w in zip(W.row[order], W.col[order], W.data[order]):
            fh.write(f"{i} {j} {float(w)!r}\n")


def read_graph_coo(path):
    from .graph import WeightedGraph

    with open(path) as fh:
        N, nnz = (int(t) for t in fh.readline().split())
        data = np.loadtxt(fh, ndmin=2) if nnz else np.zeros((0, 3))
    if data.shape[0] != nnz:
        raise ValueError(f"header promises {nnz} entries, found {data.shape[0]}")
    W = sparse.csr_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))),
                          shape=(N, N))
    return WeightedGraph(W, ("explicit",))


def write_predictions_csv(path, U, predicted, truth=None):
    """index, true label (or -1), predicted label, max component of U."""
    U = np.asarray(U)
    truth = np.full(U.shape[0], -1) if truth is None else np.asarray(truth)
    rows = [{"index": i, "true_label": int(truth[i]), "predicted_label": int(predicted[i]),
             "max_component": float(U[i].max())} for i in range(U.shape[0])]
    write_rows_csv(path, rows, ["index", "true_label", "predicted_label", "max_component"])


def write_trajectory_csv(path, traj, c0=1.0):
    from .ode import velocity_adjusted_perimeter

    plain, adjusted = velocity_adjusted_perimeter(traj.r, traj.rdot, c0)
    rows = [{"t": t, "r": r, "rdot": v, "plain_perimeter": p, "adjusted_perimeter": a}
            for t, r, v, p, a in zip(traj.t, traj.r, traj.rdot, plain, adjusted)]
    write_rows_csv(path, rows, ["t", "r", "rdot", "plain_perimeter", "adjusted_perimeter"])
