import json
import math

import pytest

from hypertree.cli import (
    ExperimentSpec,
    SpecError,
    load_spec,
    main,
    parse_spec_file,
    validate,
)


def write_spec(tmp_path, text, name="exp.spec"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestSpecParsing:
    def test_scalars_lists_ranges(self, tmp_path):
        p = write_spec(tmp_path, """
            # comment
            m = 2
            R = 8..10
            B = 1.0
            ks = 1,4,16
            strategy = random_uniform
        """)
        entries = parse_spec_file(p)
        assert entries["m"][0] == 2
        assert entries["R"][0] == [8, 9, 10]
        assert entries["B"][0] == 1.0
        assert entries["ks"][0] == [1, 4, 16]
        assert entries["strategy"][0] == "random_uniform"

    def test_duplicate_key_rejected(self, tmp_path):
        p = write_spec(tmp_path, "m = 2\nm = 3\n")
        with pytest.raises(SpecError, match="line 2"):
            parse_spec_file(p)

    def test_malformed_line_reports_position(self, tmp_path):
        p = write_spec(tmp_path, "m = 2\nbogus line\n")
        with pytest.raises(SpecError, match="line 2"):
            parse_spec_file(p)

    def test_empty_value_is_empty_grid(self, tmp_path):
        p = write_spec(tmp_path, "R =\nm = 2\n")
        assert parse_spec_file(p)["R"][0] == []


class TestValidate:
    def make(self, **params):
        return ExperimentSpec(suite="protocol", params=params,
                              lines={k: i + 1 for i, k in enumerate(params)})

    def test_rho_at_capacity_zero(self):
        out = validate(self.make(rho=0.5))
        assert len(out) == 1 and "capacity zero" in out[0]

    def test_eta_band(self):
        assert validate(self.make(m=2, eta=0.3))  # 0.3 > log(2)/4
        assert not validate(self.make(m=2, eta=0.2 * math.log(2)))

    def test_leaf_cap_diagnostic(self):
        out = validate(self.make(m=2, R=[40]))
        assert any("required cap" in d for d in out)

    def test_kappa_condition(self):
        out = validate(self.make(m=3, R=[3], eps=0.1, kappa=1.0))
        assert any("curvature condition" in d for d in out)


class TestRunSuites:
    def test_wavelet_suite_row_count(self, tmp_path):
        spec = write_spec(tmp_path, "m = 2\nR = 4\nk = 1\neps = 0.5\n")
        out = tmp_path / "out"
        code = main(["wavelet", "--spec", str(spec), "--out", str(out)])
        assert code == 0
        lines = (out / "wavelet.csv").read_text().splitlines()
        assert len(lines) == 1 + 15  # header + one row per wavelet
        summary = json.loads((out / "summary.json").read_text())
        assert summary["ok"]
        assert summary["extra"]["gram_max_deviation"] <= 1e-10
        assert json.loads((out / "spec.json").read_text())["suite"] == "wavelet"

    def test_embed_suite_distortion_check(self, tmp_path):
        spec = write_spec(tmp_path, "m = 3\nR = 3\nk = 2\neps = 0.1\nkappa = calibrate\n")
        out = tmp_path / "out"
        code = main(["embed", "--spec", str(spec), "--out", str(out)])
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["checks"]["distortion_within_1_plus_eps"]
        assert summary["extra"]["distortion"]["D"] <= 1.1 + 1e-9
        header = (out / "embed.csv").read_text().splitlines()[0]
        assert header == "node_id,coord_0,coord_1,polar_radius"

    def test_collapse_suite(self, tmp_path):
        spec = write_spec(tmp_path,
                          "m = 2\nR = 6,8\nk = 2\nB = 1.0\neta = 0.1\nseeds = 2\n")
        out = tmp_path / "out"
        code = main(["collapse", "--spec", str(spec), "--out", str(out)])
        assert code == 0
        lines = (out / "collapse.csv").read_text().splitlines()
        assert lines[0] == ("m,R,k,B,eta,seed,strategy,euclid_dist,bound,"
                            "corr_dist,lip_lower_bound")
        assert len(lines) == 1 + 4

    def test_protocol_suite(self, tmp_path):
        spec = write_spec(tmp_path, "m = 2\nR = 4\nrho = 0.1\ndelta = 0.1\ntrials = 60\n")
        out = tmp_path / "out"
        code = main(["protocol", "--spec", str(spec), "--out", str(out)])
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["checks"]["all_calibrations_converged"]

    def test_empty_grid_header_only(self, tmp_path):
        spec = write_spec(tmp_path, "m = 2\nR =\nseeds = 2\n")
        out = tmp_path / "out"
        code = main(["collapse", "--spec", str(spec), "--out", str(out)])
        assert code == 0
        lines = (out / "collapse.csv").read_text().splitlines()
        assert len(lines) == 1

    def test_spec_error_exit_code(self, tmp_path):
        spec = write_spec(tmp_path, "m = 2\nR = 6\nrho = 0.5\n")
        out = tmp_path / "out"
        code = main(["protocol", "--spec", str(spec), "--out", str(out)])
        assert code == 1
        assert not (out / "protocol.csv").exists()  # no partial outputs

    def test_acceptance_failure_exit_code(self, tmp_path):
        # curvature far too small for the requested distortion
        spec = write_spec(tmp_path, "m = 3\nR = 4\nk = 2\neps = 0.1\nkappa = 4.0\n")
        out = tmp_path / "out"
        code = main(["embed", "--spec", str(spec), "--out", str(out)])
        assert code == 2
        summary = json.loads((out / "summary.json").read_text())
        assert not summary["checks"]["distortion_within_1_plus_eps"]

    def test_missing_spec_file(self, tmp_path):
        code = main(["wavelet", "--spec", str(tmp_path / "nope.spec"),
                     "--out", str(tmp_path / "out")])
        assert code == 1


class TestDeterminism:
    def run_twice(self, tmp_path, suite, text, extra_args=()):
        spec = write_spec(tmp_path, text)
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            code = main([suite, "--spec", str(spec), "--out", str(out),
                         *extra_args])
            assert code == 0
            outs.append(out)
        return outs

    @pytest.mark.parametrize("suite,text", [
        ("wavelet", "m = 2\nR = 4\nk = 2\nsubspaces = 2\n"),
        ("collapse", "m = 2\nR = 6,7\nk = 2\nB = 1.0\neta = 0.1\nseeds = 2\n"),
        ("protocol", "m = 2\nR = 4\nrho = 0.1\ntrials = 40\n"),
    ])
    def test_byte_identical_reruns(self, tmp_path, suite, text):
        a, b = self.run_twice(tmp_path, suite, text)
        for f in sorted(p.name for p in a.iterdir()):
            assert (a / f).read_bytes() == (b / f).read_bytes(), f

    def test_threads_do_not_change_bytes(self, tmp_path):
        text = "m = 2\nR = 6,7\nk = 2\nB = 1.0\neta = 0.1\nseeds = 3\n"
        spec = write_spec(tmp_path, text)
        out1, out4 = tmp_path / "t1", tmp_path / "t4"
        assert main(["collapse", "--spec", str(spec), "--out", str(out1),
                     "--threads", "1"]) == 0
        assert main(["collapse", "--spec", str(spec), "--out", str(out4),
                     "--threads", "4"]) == 0
        assert (out1 / "collapse.csv").read_bytes() == (out4 / "collapse.csv").read_bytes()

    def test_seed_override_changes_rows(self, tmp_path):
        text = "m = 2\nR = 6\nk = 2\nB = 1.0\neta = 0.1\nseeds = 1\nseed = 0\n"
        spec = write_spec(tmp_path, text)
        out0, out9 = tmp_path / "s0", tmp_path / "s9"
        assert main(["collapse", "--spec", str(spec), "--out", str(out0)]) == 0
        assert main(["collapse", "--spec", str(spec), "--out", str(out9),
                     "--seed", "9"]) == 0
        assert (out0 / "collapse.csv").read_bytes() != (out9 / "collapse.csv").read_bytes()
