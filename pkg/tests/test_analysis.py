import datetime as dt

import numpy as np
import pandas as pd
import pytest

from conftest import dataset_from_sentences
from mediadiet.analysis import (
    correlations_to_frame,
    derive_seed,
    design_matrix,
    fit_gam,
    fit_ols,
    grouped_correlations,
    pearson_bootstrap,
    regression_report,
    rolling_predict,
)
from mediadiet.errors import MediaDietError, TooFewRowsError, ZeroVarianceError
from mediadiet.gateway import NgramBackend, UnigramBackend
from mediadiet.ngram import BackgroundUnigrams, train_ngram
from mediadiet.probe import PromptSpec, TargetSpec
from mediadiet.synth import DriftSpec, gen_drifting_corpora
from oracles import ols_normal_equations, pearson_oracle


class TestPearsonBootstrap:
    def test_identity(self):
        x = np.arange(10.0)
        res = pearson_bootstrap(x, x, B=100, seed=1)
        assert res.r == pytest.approx(1.0)

    def test_negation(self):
        x = np.arange(10.0)
        res = pearson_bootstrap(x, -x, B=100, seed=1)
        assert res.r == pytest.approx(-1.0)

    def test_matches_textbook_oracle(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=40)
        y = 0.5 * x + rng.normal(size=40)
        res = pearson_bootstrap(x, y, B=50, seed=0)
        assert res.r == pytest.approx(pearson_oracle(list(x), list(y)), abs=1e-12)

    def test_zero_variance_rejected(self):
        with pytest.raises(ZeroVarianceError):
            pearson_bootstrap([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])

    def test_too_few_points_rejected(self):
        with pytest.raises(MediaDietError):
            pearson_bootstrap([1.0, 2.0], [1.0, 2.0])

    def test_non_finite_rejected(self):
        with pytest.raises(MediaDietError):
            pearson_bootstrap([1.0, np.nan, 2.0], [1.0, 2.0, 3.0])

    def test_same_seed_identical(self):
        rng = np.random.default_rng(8)
        x = rng.normal(size=50)
        y = x + rng.normal(size=50)
        a = pearson_bootstrap(x, y, B=500, seed=42)
        b = pearson_bootstrap(x, y, B=500, seed=42)
        assert (a.ci_low, a.ci_high) == (b.ci_low, b.ci_high)
        c = pearson_bootstrap(x, y, B=500, seed=43)
        assert (a.ci_low, a.ci_high) != (c.ci_low, c.ci_high)

    def test_affine_invariance(self):
        rng = np.random.default_rng(9)
        x = rng.normal(size=60)
        y = 0.4 * x + rng.normal(size=60)
        base = pearson_bootstrap(x, y, B=10, seed=0).r
        scaled = pearson_bootstrap(3.0 * x + 7.0, y, B=10, seed=0).r
        flipped = pearson_bootstrap(-2.0 * x + 1.0, y, B=10, seed=0).r
        assert scaled == pytest.approx(base, abs=1e-12)
        assert flipped == pytest.approx(-base, abs=1e-12)

    def test_ci_brackets_r_on_ordinary_data(self):
        rng = np.random.default_rng(10)
        x = rng.normal(size=200)
        y = 0.5 * x + rng.normal(size=200)
        res = pearson_bootstrap(x, y, B=2000, seed=0)
        assert res.ci_low <= res.r <= res.ci_high
        assert res.ci_low <= res.ci_high

    def test_quick_coverage_sanity(self):
        # The full 500-trial coverage study runs in the acceptance suite.
        rho, n, hits, trials = 0.5, 200, 0, 60
        master = np.random.default_rng(123)
        for t in range(trials):
            rng = np.random.default_rng(master.integers(2**32))
            x = rng.normal(size=n)
            y = rho * x + np.sqrt(1 - rho**2) * rng.normal(size=n)
            res = pearson_bootstrap(x, y, B=500, seed=t)
            hits += res.ci_low <= rho <= res.ci_high
        assert hits / trials > 0.85


def planted_frame(n=256, intercept=0.194, slope=0.115, noise=0.05, seed=0,
                  with_covariates=False):
    rng = np.random.default_rng(seed)
    score = rng.uniform(0.0, 3.0, size=n)
    y = intercept + slope * score + rng.normal(0.0, noise, size=n)
    data = {"score": score, "proportion": y}
    if with_covariates:
        data["attention"] = rng.uniform(0.2, 0.8, size=n)
        for i in range(1, 5):
            data[f"demo_age{i}"] = rng.dirichlet(np.ones(4), size=n)[:, i - 1]
    return pd.DataFrame(data)


class TestFitOls:
    def test_normal_equations_oracle_small_full_rank(self):
        for seed in range(5):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(10, 51))
            df = planted_frame(n=n, seed=seed)
            fit = fit_ols(df, "model1", B=10, seed=0)
            X = [[1.0, s] for s in df["score"]]
            oracle = ols_normal_equations(X, list(df["proportion"]))
            assert fit.coefficients["intercept"] == pytest.approx(oracle[0], abs=1e-8)
            assert fit.coefficients["media_diet_score"] == pytest.approx(oracle[1], abs=1e-8)

    def test_planted_recovery_single(self):
        df = planted_frame(seed=11)
        fit = fit_ols(df, "model1", B=2000, seed=11)
        assert fit.coefficients["intercept"] == pytest.approx(0.194, abs=0.02)
        assert fit.coefficients["media_diet_score"] == pytest.approx(0.115, abs=0.02)
        lo, hi = fit.ci["media_diet_score"]
        assert lo <= 0.115 <= hi
        assert fit.stars["media_diet_score"] == "***"

    def test_constant_y(self):
        df = planted_frame(seed=2, slope=0.0, intercept=0.5, noise=0.0)
        fit = fit_ols(df, "model1", B=500, seed=0)
        assert fit.r_squared == 0.0
        lo, hi = fit.ci["media_diet_score"]
        assert lo <= 0.0 <= hi

    def test_r_squared_consistency(self):
        df = planted_frame(seed=3)
        fit = fit_ols(df, "model1", B=10, seed=0)
        X = np.column_stack([np.ones(len(df)), df["score"].to_numpy()])
        beta = np.array([fit.coefficients["intercept"],
                         fit.coefficients["media_diet_score"]])
        resid = df["proportion"].to_numpy() - X @ beta
        y = df["proportion"].to_numpy()
        want = 1.0 - float(resid @ resid) / float(((y - y.mean()) ** 2).sum())
        assert fit.r_squared == pytest.approx(want, abs=1e-10)

    def test_duplicated_demographic_column_minimum_norm(self):
        df = planted_frame(n=120, seed=5, with_covariates=True)
        plain = fit_ols(df, "model2", B=10, seed=0)
        dup = df.copy()
        dup["demo_age1_copy"] = dup["demo_age1"]
        shadow = fit_ols(dup, "model2", B=10, seed=0)
        assert shadow.rank < len(shadow.features)
        pred_plain = plain.predict(df)
        pred_shadow = shadow.predict(dup)
        assert np.allclose(pred_plain, pred_shadow, atol=1e-8)

    def test_model2_features(self):
        df = planted_frame(n=64, seed=6, with_covariates=True)
        fit = fit_ols(df, "model2", B=10, seed=0)
        assert fit.features[:4] == ["intercept", "media_diet_score", "attention",
                                    "media_diet_score_x_attention"]
        assert all(f.startswith("demo_") for f in fit.features[4:])

    def test_model2_requires_covariates(self):
        df = planted_frame(n=64, seed=6)
        with pytest.raises(MediaDietError, match="attention"):
            fit_ols(df, "model2")

    def test_too_few_rows(self):
        df = planted_frame(n=1, seed=7)
        with pytest.raises(TooFewRowsError):
            fit_ols(df, "model1")

    def test_deterministic_given_seed(self):
        df = planted_frame(seed=8)
        a = fit_ols(df, "model1", B=300, seed=9)
        b = fit_ols(df, "model1", B=300, seed=9)
        assert a.ci == b.ci and a.error_ci == b.error_ci

    def test_report_layout(self):
        df = planted_frame(seed=12)
        fit = fit_ols(df, "model1", B=100, seed=0)
        report = regression_report(fit)
        assert list(report["feature"])[:2] == ["intercept", "media_diet_score"]
        assert "R2" in set(report["feature"])
        assert any("RMSE" in f for f in report["feature"])


class TestGroupedCorrelations:
    def make_groups(self, rhos, n=120, seed=21):
        rng = np.random.default_rng(seed)
        frames = []
        for name, rho in rhos.items():
            x = rng.normal(size=n)
            y = rho * x + np.sqrt(max(1 - rho**2, 0)) * rng.normal(size=n)
            frames.append(pd.DataFrame({
                "score": x, "proportion": y, "category": name,
                "topic": name, "medium": "web", "variant": "orig"}))
        return pd.concat(frames, ignore_index=True)

    def test_single_group_equals_plain_bootstrap(self):
        data = self.make_groups({"socio_retro": 0.4})
        results, skipped = grouped_correlations(data, "question_category",
                                                B=400, seed=5)
        assert skipped == []
        (group, res), = results
        expected = pearson_bootstrap(
            data["score"].to_numpy(), data["proportion"].to_numpy(), B=400,
            seed=derive_seed(5, "group", "question_category", "socio_retro"))
        assert res == expected

    def test_planted_group_rhos_recovered(self):
        data = self.make_groups({"ego_retro": -0.3, "ego_pro": 0.0,
                                 "socio_pro": 0.4}, n=400)
        results, _ = grouped_correlations(data, "question_category", B=1000, seed=3)
        by_group = dict(results)
        for name, rho in (("ego_retro", -0.3), ("ego_pro", 0.0), ("socio_pro", 0.4)):
            res = by_group[name]
            assert res.ci_low <= rho <= res.ci_high, (name, res)

    def test_undersized_groups_skipped(self):
        data = self.make_groups({"big": 0.2})
        tiny = pd.DataFrame({"score": [1.0, 2.0], "proportion": [0.1, 0.2],
                             "category": "tiny", "topic": "tiny",
                             "medium": "web", "variant": "orig"})
        results, skipped = grouped_correlations(
            pd.concat([data, tiny], ignore_index=True), "question_category", B=50)
        assert [g for g, _ in results] == ["big"]
        assert skipped == [("tiny", 2)]

    def test_unknown_grouping_rejected(self):
        with pytest.raises(MediaDietError):
            grouped_correlations(self.make_groups({"a": 0.1}), "zodiac_sign")

    def test_frame_output(self):
        data = self.make_groups({"a_cat": 0.3, "b_cat": -0.1})
        results, _ = grouped_correlations(data, "topic", B=50, seed=0)
        frame = correlations_to_frame(results)
        assert list(frame["group"]) == ["a_cat", "b_cat"]


def gam_frame(n=300, seed=0, nonlinear=False, noise=0.02):
    rng = np.random.default_rng(seed)
    base = rng.uniform(0.0, 1.0, size=n)
    score = rng.uniform(0.0, 2.0, size=n)
    if nonlinear:
        y = np.sin(4.0 * base) + 0.5 * score**2
    else:
        y = 0.1 + 0.3 * base + 0.2 * score
    y = y + rng.normal(0.0, noise, size=n)
    return pd.DataFrame({"base_prob": base, "score": score, "proportion": y})


def best_linear_rmse(df):
    X = np.column_stack([np.ones(len(df)), df["base_prob"], df["score"]])
    y = df["proportion"].to_numpy()
    beta = np.linalg.lstsq(X, y, rcond=None)[0]
    return float(np.sqrt(((y - X @ beta) ** 2).mean()))


class TestFitGam:
    def test_linear_noiseless_non_inferior(self):
        df = gam_frame(seed=1, noise=0.0)
        fit = fit_gam(df, B=100, seed=0)
        assert fit.error <= best_linear_rmse(df) + 1e-6

    def test_linear_noisy_non_inferior(self):
        df = gam_frame(seed=2, noise=0.05)
        fit = fit_gam(df, B=100, seed=0)
        assert fit.error <= best_linear_rmse(df) + 1e-6

    def test_planted_nonlinearity_beats_linear(self):
        df = gam_frame(seed=3, nonlinear=True)
        fit = fit_gam(df, B=100, seed=0)
        assert fit.error < 0.9 * best_linear_rmse(df)

    def test_smooths_mean_zero_over_training(self):
        df = gam_frame(seed=4, nonlinear=True)
        fit = fit_gam(df, B=10, seed=0)
        f1 = fit.smooths[0](df["base_prob"].to_numpy())
        f2 = fit.smooths[1](df["score"].to_numpy())
        assert abs(f1.mean()) < 1e-9
        assert abs(f2.mean()) < 1e-9

    def test_predict_matches_training_fit(self):
        df = gam_frame(seed=5, nonlinear=True)
        fit = fit_gam(df, B=10, seed=0)
        pred = fit.predict(df)
        rmse = float(np.sqrt(((df["proportion"].to_numpy() - pred) ** 2).mean()))
        assert rmse == pytest.approx(fit.error, abs=1e-12)

    def test_min_rows_enforced(self):
        with pytest.raises(TooFewRowsError):
            fit_gam(gam_frame(n=20, seed=6))

    def test_converged_flag_and_iters(self):
        fit = fit_gam(gam_frame(seed=7), B=10, seed=0)
        assert fit.converged
        assert 1 <= fit.backfit_iters <= 50

    def test_error_ci_brackets_error(self):
        fit = fit_gam(gam_frame(seed=8, nonlinear=True), B=500, seed=0)
        assert fit.error_ci[0] <= fit.error <= fit.error_ci[1]


def drift_prompt():
    return PromptSpec(
        prompt_id="p-threat", question_id="q-threat",
        template="the outbreak is a [BLANK] threat to the population",
        targets=(TargetSpec("minor", answer_label="minor"),
                 TargetSpec("major", answer_label="major")))


def make_fit(slope=0.1, intercept=0.2):
    df = planted_frame(n=60, intercept=intercept, slope=slope, noise=0.01, seed=1)
    return fit_ols(df, "model1", B=10, seed=0)


def drift_backends(n_windows=6):
    models = gen_drifting_corpora(DriftSpec(n_windows=n_windows))
    backends = [((s, e), NgramBackend(train_ngram(ds), f"kn:{ds.manifest.dataset_id}"))
                for (s, e), ds in models]
    bg = BackgroundUnigrams(freq={"minor": 0.05, "major": 0.05})
    return backends, UnigramBackend(bg, "bg:fixed")


class TestRollingPredict:
    def test_cardinality_and_constant_backend(self):
        backends, base = drift_backends(4)
        constant = [(w, backends[0][1]) for w, _ in backends]
        prompts = [drift_prompt()]
        table = rolling_predict(constant, prompts, make_fit(), base)
        assert len(table) == 4 * 1 * 2
        for _, grp in table.groupby("target_word"):
            assert grp["prediction"].nunique() == 1

    def test_gap_recorded_not_interpolated(self):
        backends, base = drift_backends(3)
        backends[1] = (backends[1][0], None)
        table = rolling_predict(backends, [drift_prompt()], make_fit(), base)
        gaps = table[table["gap"]]
        assert len(gaps) == 2
        assert gaps["prediction"].isna().all()

    def test_drifting_minor_monotone_non_increasing(self):
        backends, base = drift_backends(8)
        table = rolling_predict(backends, [drift_prompt()], make_fit(slope=0.1), base)
        minor = table[table["target_word"] == "minor"].sort_values("window_start")
        preds = minor["prediction"].to_numpy()
        assert np.all(np.diff(preds) <= 1e-12)
        assert preds[0] > preds[-1]

    def test_unsorted_windows_rejected(self):
        backends, base = drift_backends(3)
        swapped = [backends[1], backends[0], backends[2]]
        with pytest.raises(MediaDietError, match="sorted"):
            rolling_predict(swapped, [drift_prompt()], make_fit(), base)

    def test_incompatible_fit_rejected(self):
        backends, base = drift_backends(2)
        df = planted_frame(n=64, seed=6, with_covariates=True)
        model2 = fit_ols(df, "model2", B=10, seed=0)
        with pytest.raises(MediaDietError, match="features"):
            rolling_predict(backends, [drift_prompt()], model2, base)

    def test_ground_truth_overlay(self):
        from mediadiet.survey import SurveyWave
        backends, base = drift_backends(3)
        (s0, e0) = backends[0][0]
        waves = [SurveyWave("w", s0 + dt.timedelta(days=2), "NYT", "q-threat",
                            {"minor": 0.44, "major": 0.5})]
        table = rolling_predict(backends, [drift_prompt()], make_fit(), base,
                                waves=waves)
        first_minor = table[(table["window_start"] == s0.isoformat())
                            & (table["target_word"] == "minor")]
        assert first_minor["ground_truth"].iloc[0] == pytest.approx(0.44)
        later = table[table["window_start"] != s0.isoformat()]
        assert later["ground_truth"].isna().all()


class TestDesignMatrix:
    def test_model1_columns(self):
        df = planted_frame(n=10, seed=0)
        X, names = design_matrix(df, "model1")
        assert names == ["intercept", "media_diet_score"]
        assert np.all(X[:, 0] == 1.0)

    def test_unknown_model(self):
        with pytest.raises(MediaDietError):
            design_matrix(planted_frame(n=10, seed=0), "model3")
