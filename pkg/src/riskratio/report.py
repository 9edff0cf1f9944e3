"""Report serialization: canonical machine JSON and aligned human tables.

Machine output is deterministic: keys sorted, floats printed with %.17g
(full round-trip precision), newline-terminated; parsing and re-emitting a
report is byte-identical.  Files are written atomically (temp + rename).
"""

from __future__ import annotations

import json
import os
import tempfile


def _fmt_float(x: float) -> str:
    if x != x:
        return "NaN"
    if x in (float("inf"), float("-inf")):
        return '"Infinity"' if x > 0 else '"-Infinity"'
    return format(x, ".17g")


def _dump(obj, indent: int) -> str:
    pad = "  " * indent
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad}  {_dump(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f"{pad}  {json.dumps(str(k))}: {_dump(v, indent + 1)}"
            for k, v in sorted(obj.items())
        ]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def to_machine_json(payload) -> str:
    return _dump(payload, 0) + "\n"


def write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def align_table(header: list[str], rows: list[list[str]]) -> str:
    """Left-align the first column, right-align the rest."""
    table = [header] + rows
    widths = [max(len(row[i]) for row in table) for i in range(len(header))]
    lines = []
    for row in table:
        cells = [row[0].ljust(widths[0])] + [
            cell.rjust(widths[i]) for i, cell in enumerate(row) if i > 0
        ]
        lines.append("  ".join(cells).rstrip())
    lines.insert(1, "-" * max(len(line) for line in lines))
    return "\n".join(lines)


def _cell_num(value, fmt: str) -> str:
    return "NA" if value is None else format(value, fmt)


def study_table(payload: dict) -> str:
    """Human-readable study report mirroring the Bias/RMSE/CP layout."""
    truth = payload["truth"]
    rows = []
    for cell in payload["cells"]:
        na = cell.get("na", False)
        rows.append([
            f"{cell['method']} / {cell['specification']} / {cell['estimand']}",
            _cell_num(None if na else cell.get("bias"), ".2f"),
            _cell_num(None if na else cell.get("rmse"), ".2f"),
            _cell_num(None if na else cell.get("coverage"), ".0f"),
            str(cell["failures"]),
            _cell_num(None if na else cell.get("mcse_bias"), ".4f"),
            _cell_num(None if na else cell.get("mcse_coverage"), ".2f"),
        ])
    table = align_table(
        ["Method / specification / estimand", "Bias", "RMSE", "CP",
         "Failures", "MCSE(bias)", "MCSE(CP)"],
        rows,
    )
    cfg = payload["config"]
    head = (
        f"Scenario: {cfg['scenario']}  n={cfg['n']}  "
        f"R={cfg['replications']}  base_seed={cfg['base_seed']}\n"
        f"True marginal RR: {truth['rr_true']:.4f} "
        f"(MCSE {truth['mcse']:.4f}, n={truth['n']})\n"
    )
    return head + table + "\n"


def fit_table(estimates: list[dict], level: float) -> str:
    pct = f"{100 * level:g}%"
    rows = [
        [e["label"], f"{e['rr']:.2f}", f"{e['ci_low']:.2f}",
         f"{e['ci_high']:.2f}", e["method"]]
        for e in estimates
    ]
    return align_table(["Contrast", "RR", f"{pct} low", f"{pct} high", "Method"], rows) + "\n"
