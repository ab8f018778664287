"""Prediction-log ingestion, train/test splitting, confusion matrices, and
table-style reports.

Log format: optional leading "#" comment lines, then a header line
``classifiers<TAB>name...`` declaring classifier order, then one record per
line -- frame id, session id, timestamp, true class, and ten probabilities
per classifier, all tab-separated.
"""

import io
from dataclasses import dataclass, field

import numpy as np

from fusionkit import ensemble, mlp
from fusionkit.ensemble import (
    NUM_CLASSES,
    PredictionRecord,
    accuracy,
    majority_vote,
    nll,
    stack_outputs,
    weighted_vote,
)
from fusionkit.errors import SchemaError

SUM_TOL = 1e-3


@dataclass
class SplitSpec:
    """Either a seeded random split or a hold-out of whole sessions."""

    mode: str
    test_fraction: float | None = None
    test_sessions: tuple | None = None
    seed: int = 0

    def __post_init__(self):
        if self.mode == "random":
            if self.test_fraction is None or self.test_sessions is not None:
                raise ValueError("random mode takes test_fraction only")
            if not 0.0 <= self.test_fraction <= 1.0:
                raise ValueError("test_fraction must lie in [0, 1]")
        elif self.mode == "by_session":
            if self.test_sessions is None or self.test_fraction is not None:
                raise ValueError("by_session mode takes test_sessions only")
        else:
            raise ValueError(f"unknown split mode {self.mode!r}")


@dataclass
class ConfusionMatrix:
    counts: np.ndarray
    row_percent: np.ndarray = field(repr=False)
    empty_rows: tuple = ()

    @property
    def total(self):
        return int(self.counts.sum())


def load_log(path_or_file):
    """Parse a prediction log into a list of PredictionRecord.

    Distributions whose sum is within 1e-3 of one are renormalized; anything
    further off, and any malformed line, raises SchemaError with the
    offending line number.
    """
    if hasattr(path_or_file, "read"):
        return _parse_log(path_or_file)
    with open(path_or_file) as f:
        return _parse_log(f)


def _parse_log(f):
    names = None
    records = []
    for lineno, line in enumerate(f, start=1):
        line = line.rstrip("\n")
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if names is None:
            if parts[0] != "classifiers" or len(parts) < 2:
                raise SchemaError(
                    "first data line must declare 'classifiers\\tname...'",
                    line=lineno,
                )
            names = parts[1:]
            if len(set(names)) != len(names):
                raise SchemaError("duplicate classifier names", line=lineno)
            continue
        expected = 4 + NUM_CLASSES * len(names)
        if len(parts) != expected:
            raise SchemaError(
                f"expected {expected} fields, got {len(parts)}", line=lineno
            )
        frame_id, session_id = parts[0], parts[1]
        try:
            timestamp = float(parts[2])
            true_class = int(parts[3])
            values = np.array([float(v) for v in parts[4:]])
        except ValueError:
            raise SchemaError("non-numeric field", line=lineno) from None
        if not 0 <= true_class < NUM_CLASSES:
            raise SchemaError(f"true class {true_class} out of range", line=lineno)
        outputs = {}
        for j, name in enumerate(names):
            dist = values[j * NUM_CLASSES : (j + 1) * NUM_CLASSES]
            if (dist < 0).any():
                raise SchemaError(f"negative probability for {name}", line=lineno)
            total = dist.sum()
            if abs(total - 1.0) > SUM_TOL:
                raise SchemaError(
                    f"distribution for {name} sums to {total!r}", line=lineno
                )
            # Renormalize sloppy rows, but leave float-exact ones untouched so
            # a write-read cycle is bit-identical.
            outputs[name] = dist if abs(total - 1.0) <= 1e-12 else dist / total
        records.append(
            PredictionRecord(
                frame_id=frame_id,
                session_id=session_id,
                timestamp_s=timestamp,
                true_class=true_class,
                outputs=outputs,
            )
        )
    if names is None:
        raise SchemaError("log has no classifiers header")
    return records


def save_log(path_or_file, records, classifier_names=None):
    """Write records in the log format (floats via repr, so values round-trip)."""
    if classifier_names is None:
        if not records:
            raise ValueError("cannot infer classifier names from an empty log")
        classifier_names = tuple(records[0].outputs)
    if hasattr(path_or_file, "write"):
        _write_log(path_or_file, records, classifier_names)
    else:
        with open(path_or_file, "w") as f:
            _write_log(f, records, classifier_names)


def _write_log(f, records, names):
    for rec in records:
        for ident in (rec.frame_id, rec.session_id):
            if not ident or any(ch.isspace() for ch in ident):
                raise ValueError(f"identifier {ident!r} must be non-empty and "
                                 "free of whitespace")
    f.write("classifiers\t" + "\t".join(names) + "\n")
    for rec in records:
        cells = [rec.frame_id, rec.session_id, repr(float(rec.timestamp_s)),
                 str(int(rec.true_class))]
        for name in names:
            cells.extend(repr(float(v)) for v in rec.outputs[name])
        f.write("\t".join(cells) + "\n")


def log_to_string(records, classifier_names=None):
    buf = io.StringIO()
    save_log(buf, records, classifier_names)
    return buf.getvalue()


def split(records, spec):
    """Partition records into (train, test) per the split spec.

    Random mode shuffles with the seed and holds out the tail fraction;
    by_session mode holds out every record of the listed sessions.  The
    partition is exact: disjoint and covering.
    """
    if spec.mode == "random":
        rng = np.random.default_rng(spec.seed)
        order = rng.permutation(len(records))
        n_train = int(round((1.0 - spec.test_fraction) * len(records)))
        train = [records[i] for i in order[:n_train]]
        test = [records[i] for i in order[n_train:]]
        return train, test
    present = {rec.session_id for rec in records}
    missing = [s for s in spec.test_sessions if s not in present]
    if missing:
        raise ValueError(f"unknown session id(s): {missing}")
    held = set(spec.test_sessions)
    train = [rec for rec in records if rec.session_id not in held]
    test = [rec for rec in records if rec.session_id in held]
    return train, test


def confusion(predictions, truths):
    """10x10 confusion matrix of argmax decisions (rows actual, columns
    predicted) with row percentages; rows with no samples are flagged."""
    predictions = np.asarray(predictions, dtype=np.float64)
    truths = np.asarray(truths)
    if predictions.ndim != 2 or predictions.shape[0] != truths.shape[0]:
        raise ValueError("predictions and truths must have matching lengths")
    counts = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    decided = predictions.argmax(axis=1)
    for actual, predicted in zip(truths, decided):
        counts[actual, predicted] += 1
    row_sums = counts.sum(axis=1)
    empty = tuple(int(i) for i in np.flatnonzero(row_sums == 0))
    safe = np.where(row_sums == 0, 1, row_sums)
    row_percent = 100.0 * counts / safe[:, None]
    return ConfusionMatrix(counts=counts, row_percent=row_percent, empty_rows=empty)


def fuse_records(records, fusion):
    """Fused (n, 10) distributions under a fusion directive.

    ``fusion`` is "majority", ("weights", vector), or ("mlp", MLPFuser).
    """
    outputs, truths, names = stack_outputs(records)
    if fusion == "majority":
        return majority_vote(outputs), truths, names
    kind, arg = fusion
    if kind == "weights":
        return weighted_vote(outputs, arg), truths, names
    if kind == "mlp":
        return mlp.predict(arg, records), truths, names
    raise ValueError(f"unknown fusion {fusion!r}")


@dataclass
class Report:
    """Per-classifier and fused metrics plus the fused confusion matrix."""

    rows: list  # (source name, nll, accuracy percent)
    matrix: ConfusionMatrix
    fusion_label: str

    def metrics_csv(self):
        lines = ["source,nll,accuracy_pct"]
        lines += [f"{name},{val:.4f},{acc:.2f}" for name, val, acc in self.rows]
        return "\n".join(lines) + "\n"

    def confusion_csv(self):
        header = "actual," + ",".join(f"C{j}" for j in range(NUM_CLASSES))
        lines = [header]
        for i in range(NUM_CLASSES):
            cells = ",".join(str(int(v)) for v in self.matrix.counts[i])
            lines.append(f"C{i},{cells}")
        return "\n".join(lines) + "\n"

    def text(self):
        width = max(len(name) for name, _, _ in self.rows)
        lines = [f"{'Source'.ljust(width)}  {'Loss (NLL)':>10}  {'Accuracy (%)':>12}"]
        for name, val, acc in self.rows:
            lines.append(f"{name.ljust(width)}  {val:10.4f}  {acc:12.2f}")
        lines.append("")
        lines.append(f"Confusion matrix ({self.fusion_label}, row % of actual)")
        head = "      " + "".join(f"{f'C{j}':>8}" for j in range(NUM_CLASSES))
        lines.append(head)
        for i in range(NUM_CLASSES):
            row = "".join(f"{v:8.2f}" for v in self.matrix.row_percent[i])
            flag = " *" if i in self.matrix.empty_rows else ""
            lines.append(f"C{i}    {row}{flag}")
        if self.matrix.empty_rows:
            lines.append("* no samples with this actual class")
        return "\n".join(lines) + "\n"


def report(test_records, fusion="majority"):
    """Evaluate each classifier and the fused ensemble on ``test_records``."""
    outputs, truths, names = stack_outputs(test_records)
    rows = []
    for j, name in enumerate(names):
        preds = outputs[:, j, :]
        rows.append((name, nll(preds, truths), accuracy(preds, truths)))
    fused, _, _ = fuse_records(test_records, fusion)
    label = fusion if isinstance(fusion, str) else fusion[0]
    rows.append((f"fused_{label}", nll(fused, truths), accuracy(fused, truths)))
    return Report(rows=rows, matrix=confusion(fused, truths), fusion_label=label)
