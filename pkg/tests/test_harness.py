import csv
import dataclasses
import json

import numpy as np
import pytest

from cedl.attacks import AttackKind
from cedl.conflict import ConflictParams
from cedl.errors import ConfigError, InvalidInputError, ParseError
from cedl.evidence import summarize
from cedl.harness import (
    CHUNK,
    CSV_COLUMNS,
    METHODS,
    CoverageReport,
    Experiment,
    ExperimentConfig,
    MethodKind,
    _chunks,
    ablate,
    calibrate_epsilon,
    emit_report,
    evidence_sets,
    load_reports,
    predict,
    sweep_epsilon,
)
from cedl.views import TransformSpec, ViewMode

SMALL = ExperimentConfig(seed=3, n_per_class=150, ood_per_class=20, hidden=(12,), epochs=6, T=3)


@pytest.fixture(scope="module")
def exp():
    return Experiment(SMALL)


def sample_report(**kw):
    base = dict(method="edl", metric="diff-entropy", attack="l2pgd", epsilon=1.25, id_acc=0.99,
                id_cov=0.97, ood_cov=0.1, adv_cov=0.3, delta_id=1.5, delta_ood=-0.5,
                delta_adv=-0.25, seed=0)
    base.update(kw)
    return CoverageReport(**base)


class TestMethodKind:
    @pytest.mark.parametrize("name", ["edl", "edlpp-meta", "edlpp-mc", "cedl-meta", "cedl-mc"])
    def test_round_trip(self, name):
        assert MethodKind.parse(name).name == name

    @pytest.mark.parametrize("name", ["cedl", "edl-meta", "cedl-tta", ""])
    def test_unknown(self, name):
        with pytest.raises(ConfigError):
            MethodKind.parse(name)


class TestConfig:
    def test_dict_round_trip(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps(SMALL.to_dict()))
        assert ExperimentConfig.load(path) == SMALL

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="bogus"):
            ExperimentConfig.from_dict({"bogus": 1})

    @pytest.mark.parametrize("change", [
        {"method": "svm"}, {"metric": "entropy"}, {"id_family": "crosses"}, {"attack": "cw"},
        {"epsilon": -1.0}, {"T": 1}, {"beta": 0.0}, {"dropout": 1.0}, {"workers": 0},
        {"adv_cohort": "id"}, {"calibrate_with": "x"},
    ])
    def test_invalid(self, change):
        with pytest.raises(ConfigError):
            ExperimentConfig(**change)

    def test_bad_json(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("{\n  'seed': 1}")
        with pytest.raises(ConfigError, match="line 2"):
            ExperimentConfig.load(path)


class TestReport:
    def test_csv_header(self, tmp_path):
        emit_report([sample_report()], "csv", tmp_path / "r.csv")
        lines = (tmp_path / "r.csv").read_text().splitlines()
        assert lines[0] == ("method,metric,attack,epsilon,id_acc,id_cov,ood_cov,adv_cov,"
                            "delta_id,delta_ood,delta_adv,seed,wall_ms")
        assert tuple(lines[0].split(",")) == CSV_COLUMNS

    def test_csv_values_are_exact(self, tmp_path):
        r = sample_report(delta_id=0.1 + 0.2)
        emit_report(r, "csv", tmp_path / "r.csv")
        with open(tmp_path / "r.csv") as fh:
            row = list(csv.DictReader(fh))[0]
        assert float(row["delta_id"]) == 0.1 + 0.2

    def test_json_round_trip(self, tmp_path):
        reports = [sample_report(), sample_report(method="cedl-meta", id_acc=float("nan"), cut=float("-inf"))]
        emit_report(reports, "json", tmp_path / "r.json")
        back = load_reports(tmp_path / "r.json")
        assert back[0] == reports[0]
        assert np.isnan(back[1].id_acc) and back[1].cut == float("-inf")

    def test_single_json(self, tmp_path):
        emit_report(sample_report(), "json", tmp_path / "r.json")
        assert isinstance(json.loads((tmp_path / "r.json").read_text()), dict)
        assert load_reports(tmp_path / "r.json") == [sample_report()]

    def test_bad_format(self, tmp_path):
        with pytest.raises(ConfigError):
            emit_report(sample_report(), "xml", tmp_path / "r")

    def test_unwritable(self, tmp_path):
        with pytest.raises(OSError, match="nope"):
            emit_report(sample_report(), "csv", tmp_path / "nope" / "r.csv")

    def test_missing_field(self, tmp_path):
        (tmp_path / "r.json").write_text('{"method": "edl"}')
        with pytest.raises(ParseError):
            load_reports(tmp_path / "r.json")


def test_chunks():
    assert _chunks(130) == [(0, CHUNK), (CHUNK, 2 * CHUNK), (2 * CHUNK, 130)]
    assert _chunks(0) == []


class TestPredict:
    def test_shapes(self, exp):
        x = exp.data["id_test"].images[:5]
        for m in METHODS:
            alpha, extra = predict(m, exp.net, x, TransformSpec(T=3))
            assert alpha.shape == (5, SMALL.K)
            # Conflict decay may push parameters below 1.
            assert np.all(alpha >= (1.0 if m.base != "cedl" else 0.0))
            assert np.all(alpha > 0)
            assert (extra is not None) == (m.base == "cedl")

    def test_needs_grids(self, exp):
        with pytest.raises(InvalidInputError):
            predict("edl", exp.net, exp.data["id_test"].flat())

    def test_identity_views_match_edl(self, exp):
        x = exp.data["id_test"].images
        spec = TransformSpec(rotate_max_deg=0, shift_max_px=0, noise_sigma=0, T=4)
        plain = summarize(predict("edl", exp.net, x)[0]).expected_prob
        views = summarize(predict("edlpp-meta", exp.net, x, spec)[0]).expected_prob
        np.testing.assert_allclose(views, plain, rtol=0, atol=1e-12)

    def test_zero_delta_is_edlpp(self, exp):
        x = exp.data["ood_test"].images
        for mode in ("meta", "mc"):
            pp = predict(f"edlpp-{mode}", exp.net.copy(0.25), x, seed=7)[0]
            c = predict(f"cedl-{mode}", exp.net.copy(0.25), x, params=ConflictParams(delta=0.0), seed=7)[0]
            np.testing.assert_array_equal(c, pp)


class TestExperiment:
    def test_trained(self, exp):
        assert exp.train_log is not None
        assert exp.train_log.column("val_loss")[-1] < exp.train_log.column("val_loss")[0]
        assert np.mean(exp.net.predict(exp.data["id_val"].flat()) == exp.data["id_val"].labels) > 0.9

    def test_epsilon0_on_grid(self, exp):
        assert exp.epsilon0 in SMALL.eps_grid

    def test_calibrate_epsilon_returns_last(self, exp):
        va = exp.data["id_val"]
        eps, drop = calibrate_epsilon(exp.net, va.images, va.labels, (0.0, 0.01), 2.0)
        assert eps == 0.01 and drop <= 1.0

    def test_report_fields(self, exp):
        r = exp.evaluate("cedl-meta")
        assert r.method == "cedl-meta" and r.seed == SMALL.seed
        assert 0 <= r.ood_cov <= 1 and 0 <= r.adv_cov <= 1
        assert r.n_id == len(exp.data["id_test"]) and r.n_adv == len(exp.data["ood_test"])
        assert r.wall_ms == 0.0
        assert r.config["method"] == "cedl-meta"

    @pytest.mark.parametrize("method", [m.name for m in METHODS])
    def test_zero_epsilon_adv_equals_ood(self, exp, method):
        r = exp.evaluate(method, epsilon=0.0)
        assert r.adv_cov == r.ood_cov and r.delta_adv == r.delta_ood

    def test_sweep(self, exp):
        rows = sweep_epsilon(exp, ["edl", "cedl-meta"], [0.0, 0.5, 1.0])
        assert [(r.method, r.epsilon) for r in rows] == [
            ("edl", 0.0), ("edl", 0.5), ("edl", 1.0),
            ("cedl-meta", 0.0), ("cedl-meta", 0.5), ("cedl-meta", 1.0),
        ]

    def test_other_attacks_need_epsilon(self, exp):
        with pytest.raises(ConfigError):
            exp.attack_spec(kind="fgsm")
        r = exp.evaluate("edl", epsilon=0.1, attack_kind=AttackKind.SALT_PEPPER)
        assert r.attack == "saltpepper"

    def test_adv_both(self, exp):
        both = Experiment(SMALL.with_(adv_cohort="both"), net=exp.net, data=exp.data)
        r = both.evaluate("edl", epsilon=0.5)
        assert r.n_adv == len(exp.data["ood_test"]) + len(exp.data["id_test"])

    def test_calibrate_with_edl(self, exp):
        other = Experiment(SMALL.with_(calibrate_with="edl"), net=exp.net, data=exp.data)
        a, b = other.evaluate("edl"), exp.evaluate("edl")
        assert dataclasses.replace(a, config={}) == dataclasses.replace(b, config={})
        c = other.evaluate("cedl-meta")
        assert c.cut == a.cut

    def test_workers_do_not_change_bytes(self, exp, tmp_path):
        out = []
        for workers in (1, 3):
            e = Experiment(SMALL.with_(workers=workers), net=exp.net, data=exp.data)
            reports = [e.evaluate(m) for m in METHODS]
            for r in reports:
                r.config.pop("workers")
            emit_report(reports, "json", tmp_path / f"w{workers}.json")
            out.append((tmp_path / f"w{workers}.json").read_bytes())
        assert out[0] == out[1]

    def test_reproducible_from_seed(self, exp):
        again = Experiment(SMALL)
        np.testing.assert_array_equal(again.net.forward(exp.data["id_test"].flat()),
                                      exp.net.forward(exp.data["id_test"].flat()))
        assert again.evaluate("cedl-mc") == exp.evaluate("cedl-mc")

    def test_decision_dump_matches_report(self, exp, tmp_path):
        path = tmp_path / "d.csv"
        r = exp.evaluate("cedl-meta", dump_path=path)
        with open(path) as fh:
            rows = list(csv.DictReader(fh))
        for cohort, cov in (("id_test", r.id_cov), ("ood_test", r.ood_cov), ("adv", r.adv_cov)):
            kept = [int(x["retained"]) for x in rows if x["cohort"] == cohort]
            assert np.mean(kept) == cov
        for x in rows:
            assert (float(x["margin"]) > 0) == bool(int(x["retained"]))

    def test_missing_cohort(self, exp):
        data = dict(exp.data)
        del data["ood_val"]
        with pytest.raises(ConfigError):
            Experiment(SMALL, net=exp.net, data=data)


class TestAblate:
    def test_unknown_axis(self, exp):
        with pytest.raises(ConfigError):
            ablate("gamma", [1.0], SMALL, experiment=exp)

    def test_bad_value(self, exp):
        with pytest.raises(ConfigError):
            ablate("beta", [-1.0], SMALL, experiment=exp)

    @pytest.mark.parametrize("axis,values", [
        ("beta", [0.5, 3.0]), ("lambda", [0.0, 1.0]), ("delta", [0.0, 2.0]),
        ("dropout", [0.1, 0.5]), ("transform", [0.0, 1.0]),
    ])
    def test_one_report_per_value(self, exp, axis, values):
        reports = ablate(axis, values, SMALL, experiment=exp,
                         method="cedl-mc" if axis == "dropout" else None)
        assert len(reports) == len(values)
        assert all(r.wall_ms > 0 for r in reports)

    def test_wall_time_grows_with_T(self, exp):
        reports = ablate("T", [2, 10, 40], SMALL, experiment=exp)
        times = [r.wall_ms for r in reports]
        assert times[0] < times[1] < times[2]
        assert [r.config["T"] for r in reports] == [2, 10, 40]

    def test_delta_zero_matches_edlpp(self, exp):
        r = ablate("delta", [0.0], SMALL, experiment=exp)[0]
        pp = exp.evaluate("edlpp-meta")
        assert (r.id_cov, r.ood_cov, r.adv_cov, r.delta_id) == (pp.id_cov, pp.ood_cov, pp.adv_cov, pp.delta_id)


def test_views_preserve_labels(exp):
    # Argmax of the clean forward agrees with argmax of the mean view evidence.
    ds = exp.data["id_test"]
    ev = evidence_sets(ds.images, SMALL.view_spec(ViewMode.METAMORPHIC), exp.net, seed=0)
    agree = ev.mean(axis=1).argmax(axis=1) == exp.net.predict(ds.flat())
    assert np.mean(agree) >= 0.9
