import numpy as np
import pytest

from ewoc.links import BetaParams
from ewoc.model import (DoseScheme, FeasibilityKind, FeasibilitySchedule,
                        ModelConfig, ToxicityRecord)
from ewoc.posterior import BackendSpec
from ewoc.trial import (ConfigError, DoseMismatchError, MtdEstimator,
                        SequencingError, TrialConfig, TrialStatus, estimate_mtd,
                        new_trial, record_outcome, recommend_next,
                        snapshot_from_json, snapshot_to_json)

C_SCHEDULE = FeasibilitySchedule(FeasibilityKind.CONDITIONAL, 0.25, 0.05)
FAST = BackendSpec(resolution=101)


def default_config(**kw):
    base = dict(feasibility=C_SCHEDULE, sample_size=20)
    base.update(kw)
    return TrialConfig(**base)


class TestNewTrial:
    def test_default_config_ready(self):
        state = new_trial(default_config())
        assert state.status is TrialStatus.READY_TO_DOSE
        assert recommend_next(state).administered_dose == 0.0

    def test_starting_dose_off_grid_rejected(self):
        with pytest.raises(ConfigError) as err:
            default_config(scheme=DoseScheme.equally_spaced(0.25),
                           starting_dose=0.3)
        assert "grid" in str(err.value)

    def test_zero_cohort_rejected(self):
        with pytest.raises(ConfigError):
            default_config(cohort_size=0)

    def test_all_violations_listed(self):
        with pytest.raises(ConfigError) as err:
            default_config(cohort_size=0, starting_dose=2.0)
        assert len(err.value.problems) >= 2


class TestRecommendNext:
    def test_first_dose_is_starting_dose(self):
        state = new_trial(default_config(starting_dose=0.1))
        rec = recommend_next(state)
        assert rec.continuous_dose == 0.1
        assert rec.administered_dose == 0.1
        assert rec.alpha_used == 0.25

    def test_after_one_record_regression(self):
        # a no-DLT at x_min carries no information about gamma, so the
        # 0.25-quantile stays at the prior value; frozen from the 401 grid
        state = new_trial(default_config(feasibility=FeasibilitySchedule(
            FeasibilityKind.FIXED, 0.25, 0.0)))
        state = record_outcome(state, 0.0, 0)
        rec = recommend_next(state)
        assert rec.alpha_used == 0.25
        assert rec.continuous_dose == pytest.approx(0.24999999999999956, abs=1e-12)

    def test_no_skip_on_second_recommendation(self):
        cfg = default_config(scheme=DoseScheme.equally_spaced(0.2))
        state = record_outcome(new_trial(cfg), 0.0, 0)
        rec = recommend_next(state)
        assert rec.continuous_dose > 0.2  # would escalate past one step
        assert rec.administered_dose == pytest.approx(0.2)

    def test_complete_trial_rejects(self):
        cfg = default_config(sample_size=1)
        state = record_outcome(new_trial(cfg), 0.0, 0)
        with pytest.raises(SequencingError):
            recommend_next(state)

    def test_pending_cohort_rejects(self):
        cfg = default_config(cohort_size=2, sample_size=4)
        state = record_outcome(new_trial(cfg), 0.0, 0)
        assert state.status is TrialStatus.AWAITING_OUTCOME
        with pytest.raises(SequencingError):
            recommend_next(state)


class TestRecordOutcome:
    def test_appends(self):
        state = new_trial(default_config())
        state2 = record_outcome(state, 0.0, 1)
        assert len(state2.records) == 1
        assert len(state.records) == 0  # original value untouched

    def test_dose_mismatch(self):
        state = new_trial(default_config())
        with pytest.raises(DoseMismatchError):
            record_outcome(state, 0.4, 0)

    def test_completion_and_overflow(self):
        cfg = default_config(sample_size=2, backend=FAST)
        state = new_trial(cfg)
        for _ in range(2):
            dose = recommend_next(state).administered_dose
            state = record_outcome(state, dose, 0)
        assert state.status is TrialStatus.COMPLETE
        with pytest.raises(SequencingError):
            record_outcome(state, 0.0, 0)

    def test_cohort_shares_dose(self):
        cfg = default_config(cohort_size=2, sample_size=4, backend=FAST)
        state = new_trial(cfg)
        state = record_outcome(state, 0.0, 0)
        # second cohort member must be dosed identically
        state = record_outcome(state, 0.0, 1)
        assert state.status is TrialStatus.READY_TO_DOSE


class TestEstimateMtd:
    def test_prior_median(self):
        est = estimate_mtd(new_trial(default_config()))
        assert est.dose == pytest.approx(0.5, abs=0.003)
        assert est.interim

    def test_beta_prior_median_oracle(self):
        cfg = default_config(model=ModelConfig(prior_gamma=BetaParams(2, 5)))
        est = estimate_mtd(new_trial(cfg))
        assert est.dose == pytest.approx(0.26445, abs=0.003)

    def test_six_record_regression(self):
        state = new_trial(default_config())
        for dose, dlt in [(0.0, 0), (0.1, 0), (0.25, 0), (0.4, 1), (0.3, 0),
                          (0.45, 1)]:
            state = state.__class__(config=state.config,
                                    records=state.records + (ToxicityRecord(dose, dlt),))
        est = estimate_mtd(state)
        assert est.dose == pytest.approx(0.35406518562878225, abs=1e-12)

    def test_alpha_quantile_estimator(self):
        cfg = default_config(mtd_estimator=MtdEstimator.ALPHA_QUANTILE)
        est = estimate_mtd(new_trial(cfg))
        assert est.dose == pytest.approx(0.25, abs=0.003)


def random_trajectory(rng, n=6):
    scheme = (DoseScheme.equally_spaced(rng.choice([0.1, 0.2, 0.25]))
              if rng.random() < 0.5 else DoseScheme.continuous())
    cfg = default_config(scheme=scheme, sample_size=n, backend=FAST)
    state = new_trial(cfg)
    recs = []
    while state.status is not TrialStatus.COMPLETE:
        rec = recommend_next(state)
        recs.append(rec)
        state = record_outcome(state, rec.administered_dose,
                               int(rng.random() < 0.25))
    return state, recs


class TestReplay:
    def test_snapshot_round_trip(self):
        rng = np.random.default_rng(21)
        state, recs = random_trajectory(rng)
        loaded = snapshot_from_json(snapshot_to_json(state))
        assert loaded == state
        assert loaded.status is TrialStatus.COMPLETE

    def test_replay_reproduces_recommendations(self):
        rng = np.random.default_rng(22)
        for _ in range(5):
            state, recs = random_trajectory(rng, n=4)
            loaded = snapshot_from_json(snapshot_to_json(state))
            replayed = new_trial(loaded.config)
            for i, r in enumerate(loaded.records):
                rec = recommend_next(replayed) \
                    if replayed.status is TrialStatus.READY_TO_DOSE else None
                assert rec.continuous_dose == recs[i].continuous_dose
                assert rec.administered_dose == recs[i].administered_dose
                replayed = record_outcome(replayed, r.dose, r.dlt)

    def test_verify_replay_flag(self):
        rng = np.random.default_rng(23)
        state, _ = random_trajectory(rng, n=3)
        verified = snapshot_from_json(snapshot_to_json(state), verify_replay=True)
        assert verified.records == state.records

    def test_too_many_records_rejected(self):
        state, _ = random_trajectory(np.random.default_rng(24), n=3)
        import json
        doc = json.loads(snapshot_to_json(state))
        doc["records"].append({"dose": 0.0, "dlt": 0})
        with pytest.raises(ConfigError):
            snapshot_from_json(json.dumps(doc))

    def test_equal_inputs_equal_outputs(self):
        cfg = default_config(backend=FAST)
        a = record_outcome(new_trial(cfg), 0.0, 0)
        b = record_outcome(new_trial(cfg), 0.0, 0)
        assert recommend_next(a) == recommend_next(b)
