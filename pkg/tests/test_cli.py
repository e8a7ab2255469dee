import csv
import json
import math

import numpy as np
import pytest

from dynwave.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, EXIT_VERDICT, emit_csv, main
from dynwave.config import PRESET_PARAMS, parse_config
from dynwave.errors import ConfigError, DomainError
from dynwave.presets import ExperimentResult, PRESETS, growth_slope, run_preset


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return {c: np.array([float(r[i]) for r in body]) for i, c in enumerate(header)}


class TestParseConfig:
    def test_spectrum_example(self):
        c = parse_config("command=spectrum\nN=100\nbeta0=-1\nbeta1=-1")
        assert c.command == "spectrum" and c.N == 100
        assert (c.spec.beta0, c.spec.beta1) == (-1.0, -1.0)
        assert c.T == 10.0 and c.time_step == pytest.approx(0.5 / 100) and c.p == 2.0

    def test_defaults(self):
        c = parse_config("")
        assert (c.N, c.T, c.dt, c.p) == (200, 10.0, None, 2.0)

    def test_preset_loads_parameters(self):
        c = parse_config("command=simulate\npreset=prop73_3")
        s = c.spec
        assert (s.alpha0, s.alpha1, s.beta0, s.beta1) == (0.0, 0.0, 0.0, 0.0)
        assert s.q_coef is None and s.r_coef is None
        assert c.f == "sin3_5"

    def test_explicit_keys_override_preset(self):
        c = parse_config("N=120\npreset=prop73_2\nbeta0=-3")
        assert c.N == 120 and c.beta0 == -3.0 and c.beta1 == -1.0

    def test_comments_and_blank_lines(self):
        c = parse_config("# header\n\nN = 64   # cells\n")
        assert c.N == 64

    @pytest.mark.parametrize(
        "text, line",
        [
            ("N=3", 1),
            ("N=100\nfoo=1", 2),
            ("\nT=abc", 2),
            ("N=100\ndt=0.01", 2),
            ("p=0.5", 1),
            ("command=plot", 1),
            ("preset=nope", 1),
            ("f=weird", 1),
            ("N=10.5", 1),
            ("T=inf", 1),
            ("just text", 1),
        ],
    )
    def test_errors_name_the_line(self, text, line):
        with pytest.raises(ConfigError, match=f"line {line}"):
            parse_config(text)

    def test_round_trip_dict(self):
        d = parse_config("preset=acoustic1d").to_dict()
        assert d["coupling"] == "normal_derivative" and "spec" not in d
        json.dumps(d)


class TestEmit:
    def test_header_only(self, tmp_path):
        path = tmp_path / "empty.csv"
        emit_csv(ExperimentResult("x", {}, {"a": np.array([]), "b": np.array([])}), path)
        assert path.read_text() == "a,b\n"
        meta = json.loads((tmp_path / "empty.csv.meta.json").read_text())
        assert meta["n_rows"] == 0

    def test_full_precision(self, tmp_path):
        path = tmp_path / "p.csv"
        emit_csv(ExperimentResult("x", {"s": 0.1}, {"v": np.array([1 / 3])}), path)
        assert float(path.read_text().splitlines()[1]) == 1 / 3

    def test_non_finite_scalar_rejected(self):
        with pytest.raises(DomainError):
            ExperimentResult("x", {"bad": math.nan})

    def test_unequal_columns_rejected(self):
        with pytest.raises(DomainError):
            ExperimentResult("x", {}, {"a": np.zeros(2), "b": np.zeros(3)})

    def test_trajectory_schema(self, tmp_path):
        out = tmp_path / "sim.csv"
        assert main(["simulate", "--N", "20", "--T", "0.5", "--output", str(out)]) == EXIT_OK
        assert out.read_text().splitlines()[0] == "t,energy,l2_norm,trace0,trace1"
        meta = json.loads((tmp_path / "sim.csv.meta.json").read_text())
        assert meta["config"]["N"] == 20 and meta["config"]["command"] == "simulate"

    @pytest.mark.parametrize("args", [["decay", "--decay_cells", "2000"], ["verify", "--preset", "prop73_3", "--N", "40"]])
    def test_deterministic(self, tmp_path, args):
        out = tmp_path / "d.csv"
        meta = tmp_path / "d.csv.meta.json"
        runs = []
        for _ in range(2):
            assert main(args + ["--output", str(out)]) in (EXIT_OK, EXIT_VERDICT)
            runs.append((out.read_bytes(), meta.read_bytes()))
        assert runs[0] == runs[1]


class TestMain:
    def test_config_file_and_flag_override(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("preset=factorization\nN=500\n")
        assert main(["verify", "--config", str(cfg), "--N", "80"]) == EXIT_OK
        assert "PASS  max_residual" in capsys.readouterr().out

    def test_verdict_failure(self):
        # the two-level refinement at N=200/400 cannot reach the 0.05 residual bound
        assert main(["verify", "--preset", "charroots_match"]) == EXIT_VERDICT

    def test_config_error(self, capsys):
        assert main(["simulate", "--N", "2"]) == EXIT_CONFIG
        assert "N must be >= 4" in capsys.readouterr().err

    def test_unknown_flag(self):
        assert main(["simulate", "--colour", "red"]) == EXIT_CONFIG

    def test_missing_file(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "none.cfg")]) == EXIT_CONFIG

    def test_numerical_error(self):
        assert main(["simulate", "--N", "10", "--r", "1e300", "--T", "1"]) == EXIT_NUMERICAL

    def test_bad_interval(self):
        assert main(["charroots", "--lam_min", "1", "--lam_max", "0"]) == EXIT_CONFIG

    def test_charroots_command(self, tmp_path):
        out = tmp_path / "r.csv"
        assert main(["charroots", "--beta0", "-1", "--beta1", "-1", "--lam_min", "-50", "--lam_max", "-0.05", "--output", str(out)]) == EXIT_OK
        np.testing.assert_allclose(read_csv(out)["root"][-1], -0.65395537432463668884, atol=1e-9)

    def test_spectrum_command(self, tmp_path):
        out = tmp_path / "s.csv"
        assert main(["spectrum", "--N", "30", "--output", str(out)]) == EXIT_OK
        assert len(read_csv(out)["re"]) == 31

    def test_thread_cap(self, monkeypatch):
        monkeypatch.setenv("DYNWAVE_THREADS", "1")
        assert main(["verify", "--preset", "factorization", "--N", "60"]) == EXIT_OK
        monkeypatch.setenv("DYNWAVE_THREADS", "x")
        assert main(["verify", "--preset", "factorization", "--N", "60"]) == EXIT_CONFIG


def recompute(name, s, c):
    """Verdict values recomputed from the CSV columns alone."""
    if name == "prop73_3":
        return {"period2_defect": np.nanmax(s["period2_defect"]), "kernel_period2_defect": np.nanmax(s["kernel_period2_defect"])}
    if name == "prop73_2":
        sel = (s["t"] >= 10 - 1e-12) & (s["t"] <= 40 + 1e-12)
        return {"l2_ratio": np.max(s["l2_norm"]) / s["l2_norm"][0], "recurrence_defect": np.min(s["recurrence"][sel])}
    if name == "prop71_decay":
        slope = np.polyfit(np.log(s["lambda"]), np.log(s["dirichlet_norm"]), 1)[0]
        return {"decay_slope": abs(slope + 1 / (2 * c.p))}
    if name == "charroots_match":
        eig = (s["kind"] == 0) & (s["N"] == c.N)
        fine = (s["kind"] == 0) & (s["N"] == 2 * c.N)
        roots = (s["kind"] == 1) & (s["N"] == c.N)
        return {
            "max_char_residual": np.max(s["residual"][eig]),
            "refinement_ratio": np.max(s["residual"][eig]) / np.max(s["residual"][fine]),
            "max_root_distance": np.max(s["residual"][roots]),
        }
    if name == "blockformula":
        p = s["part"]
        d0, d1 = np.max(s["value"][p == 0]), np.max(s["value"][p == 1])
        bnd = s["value"][p == 3]
        slope = growth_slope(s["t"][p == 2], s["value"][p == 2])
        return {
            "closed_form_defect": d0,
            "convergence_order": math.log2(d0 / d1),
            "growth_slope_rel_error": abs(slope - 1 / math.sqrt(3)) / (1 / math.sqrt(3)),
            "bounded_deviation": np.max(np.abs(bnd - bnd[0])) / bnd[0],
        }
    if name == "acoustic1d":
        return {"l2_ratio": np.max(s["l2_norm"]) / s["l2_norm"][0]}
    if name == "miyadera":
        w = np.full(len(s["s"]), s["s"][1] - s["s"][0])
        w[0] = w[-1] = w[0] / 2
        integral = np.dot(w, s["integrand"])
        return {"closed_form_error": abs(integral - 7 * 2 / math.pi)}
    if name == "factorization":
        return {"max_residual": np.max(s["residual"])}
    raise AssertionError(name)


@pytest.mark.parametrize("name", sorted(PRESET_PARAMS))
def test_verdicts_recomputable_from_series(name, tmp_path):
    c = parse_config(f"preset={name}")
    result = run_preset(name, c)
    out = tmp_path / f"{name}.csv"
    emit_csv(result, out, c)
    series = read_csv(out)
    verdicts = {v.name: v.value for v in result.verdicts}
    for key, val in recompute(name, series, c).items():
        # the growth oracle uses the analytic norm of the linear lift, so allow quadrature error
        tol = 1e-4 if key == "growth_slope_rel_error" else 1e-9
        assert val == pytest.approx(verdicts[key], rel=1e-9, abs=tol), key


def test_preset_table_complete():
    assert set(PRESETS) == set(PRESET_PARAMS)
    with pytest.raises(ConfigError):
        run_preset("nope")


@pytest.mark.parametrize("name, key, lo, hi", [("prop73_3", "period2_defect", 0, 5e-3), ("prop71_decay", "decay_slope", -0.27, -0.23), ("factorization", "max_residual", 0, 1e-10)])
def test_preset_scalars(name, key, lo, hi):
    assert lo <= run_preset(name).scalars[key] <= hi
