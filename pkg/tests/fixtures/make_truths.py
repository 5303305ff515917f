"""Regenerate oracle_truths.json, the frozen ground-truth fixture.

Run from the repository root:

    python3 tests/fixtures/make_truths.py

The fixture holds simulation-oracle values (with Monte Carlo standard
errors) for the default DgpSpec: the four sequence-contrast ATEs, the
per-sequence MTRs at the three resistance points (covariate mean), the
twelve MTE cells formed from them, and the MTE((1,1),(0,0)) curves along
each resistance axis on a 19-point grid. Tests
treat the file as read-only; regeneration with this script is byte-stable
because every oracle call uses a fixed named substream of one seed.
"""

import json
import pathlib
import sys

SEED = 20260816
ATE_DRAWS = 4_000_000
MTR_DRAWS = 2_000_000

CONTRASTS = [
    ((1, 1), (0, 0)),
    ((1, 0), (0, 0)),
    ((0, 1), (0, 0)),
    ((1, 0), (0, 1)),
]
V_POINTS = [(0.5, 0.5), (0.25, 0.75), (0.75, 0.25)]
CURVE_CONTRAST = ((1, 1), (0, 0))
CURVE_GRID = [round(0.05 * k, 2) for k in range(1, 20)]
CURVE_FIXED = 0.5


def seq_label(seq):
    return f"{seq[0]}{seq[1]}"


def contrast_label(seq_a, seq_b):
    return f"{seq_label(seq_a)}-{seq_label(seq_b)}"


def v_label(v):
    return f"{v[0]:g},{v[1]:g}"


def main():
    from dynmte.dgp import DgpSpec, oracle_ate, oracle_mtr
    from dynmte.streams import substream

    spec = DgpSpec()
    xbar = spec.x_mean
    sequences = [(0, 0), (0, 1), (1, 0), (1, 1)]

    stream_id = 0

    def next_stream():
        nonlocal stream_id
        stream_id += 1
        return substream(SEED, stream_id)

    ates = {}
    for seq_a, seq_b in CONTRASTS:
        est = oracle_ate(spec, seq_a, seq_b, draws=ATE_DRAWS, stream=next_stream())
        ates[f"ate:{contrast_label(seq_a, seq_b)}"] = {
            "value": est.value,
            "se": est.se,
            "draws": ATE_DRAWS,
        }
        print(f"ate {seq_a}-{seq_b}: {est.value:+.5f} (se {est.se:.5f})")

    # per-sequence MTRs at each v-point; contrasts are differences, with
    # independent streams per call so contrast SEs add in quadrature
    mtr = {}
    for v in V_POINTS:
        for seq in sequences:
            est = oracle_mtr(spec, seq, xbar, v, draws=MTR_DRAWS, stream=next_stream())
            mtr[(seq, v)] = est
    mtrs = {}
    for v in V_POINTS:
        for seq in sequences:
            est = mtr[(seq, v)]
            mtrs[f"mtr:{seq_label(seq)}:{v_label(v)}"] = {
                "value": est.value,
                "se": est.se,
                "draws": MTR_DRAWS,
            }
    mtes = {}
    for seq_a, seq_b in CONTRASTS:
        for v in V_POINTS:
            a, b = mtr[(seq_a, v)], mtr[(seq_b, v)]
            key = f"mte:{contrast_label(seq_a, seq_b)}:{v_label(v)}"
            mtes[key] = {
                "value": a.value - b.value,
                "se": (a.se**2 + b.se**2) ** 0.5,
                "draws": MTR_DRAWS,
            }

    curves = {}
    seq_a, seq_b = CURVE_CONTRAST
    for axis in (1, 2):
        values, ses = [], []
        for t in CURVE_GRID:
            v = (t, CURVE_FIXED) if axis == 1 else (CURVE_FIXED, t)
            a = oracle_mtr(spec, seq_a, xbar, v, draws=MTR_DRAWS, stream=next_stream())
            b = oracle_mtr(spec, seq_b, xbar, v, draws=MTR_DRAWS, stream=next_stream())
            values.append(a.value - b.value)
            ses.append((a.se**2 + b.se**2) ** 0.5)
        curves[f"axis{axis}"] = {
            "contrast": contrast_label(seq_a, seq_b),
            "fixed_v": CURVE_FIXED,
            "grid": CURVE_GRID,
            "value": values,
            "se": ses,
            "draws": MTR_DRAWS,
        }
        print(f"curve axis {axis}: {values[0]:+.4f} .. {values[-1]:+.4f}")

    out = {
        "seed": SEED,
        "spec": json.loads(spec.to_json()),
        "x": list(xbar),
        "ate": ates,
        "mtr": mtrs,
        "mte": mtes,
        "curves": curves,
    }
    path = pathlib.Path(__file__).parent / "oracle_truths.json"
    path.write_text(json.dumps(out, indent=2) + "\n")
    print(f"wrote {path}")


if __name__ == "__main__":
    sys.exit(main())
