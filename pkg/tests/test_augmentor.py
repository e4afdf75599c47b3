"""Speaker pools, deterministic planning, and batch plan execution."""
import io

import numpy as np
import pytest

from faraug.augmentor import (
    AugJob,
    AugPlan,
    build_pool,
    execute_plan,
    load_plan,
    plan_train_aug,
    plan_trial_crossaug,
    save_plan,
)
from faraug.manifests import ManifestError, UtteranceRecord, records_by_id
from faraug.scoring import Trial, crossaug_variant_ids
from faraug.audio import read_wav


class TestBuildPool:
    def test_pool_contents(self, mini_corpus):
        far, near = mini_corpus
        pool = build_pool(far, near)
        assert pool.far_speakers == {"far0000", "far0001", "far0002"}
        assert pool.near_speakers == {"near0000", "near0001"}
        assert len(pool.far_utterances) == 6
        assert pool.far_utterances == sorted(pool.far_utterances)

    def test_domain_enforced(self, mini_corpus):
        far, near = mini_corpus
        with pytest.raises(ManifestError, match="domain"):
            build_pool(near, far)

    def test_duplicate_across_domains(self, mini_corpus):
        far, near = mini_corpus
        clash = [UtteranceRecord(far[0].utt_id, "x", "/a.wav", "near")]
        with pytest.raises(ManifestError, match="duplicate utt_ids"):
            build_pool(far, near + clash)

    def test_duplicate_within_one_manifest(self, mini_corpus):
        far, near = mini_corpus
        with pytest.raises(ManifestError, match="duplicate utt_ids"):
            build_pool(far + [far[0]], near)


class TestPlanTrainAug:
    def test_shape_and_ids(self, mini_corpus):
        far, near = mini_corpus
        plan = plan_train_aug(build_pool(far, near), k_per_near=3, seed=5)
        assert plan.seed == 5
        assert len(plan.jobs) == 2 * 3
        for job in plan.jobs:
            spk = job.out_speaker_label
            assert spk in ("near0000", "near0001")
            assert job.out_utt_id == f"{job.src_utt_id}__{spk}__aug{int(job.out_utt_id[-2:]):02d}"
            assert job.src_utt_id.startswith("far")
            assert job.spk_ref_utt_id.startswith(spk)

    def test_deterministic_and_seed_sensitive(self, mini_corpus):
        far, near = mini_corpus
        pool = build_pool(far, near)
        a = plan_train_aug(pool, k_per_near=4, seed=5)
        b = plan_train_aug(pool, k_per_near=4, seed=5)
        c = plan_train_aug(pool, k_per_near=4, seed=6)
        assert a.jobs == b.jobs
        assert a.jobs != c.jobs

    def test_per_speaker_streams_independent(self, mini_corpus):
        # dropping one near speaker must not reshuffle the other's draws
        far, near = mini_corpus
        full = plan_train_aug(build_pool(far, near), k_per_near=4, seed=5)
        only0 = [r for r in near if r.speaker_id == "near0000"]
        reduced = plan_train_aug(build_pool(far, only0), k_per_near=4, seed=5)
        full0 = [j for j in full.jobs if j.out_speaker_label == "near0000"]
        assert full0 == reduced.jobs

    def test_sources_unique_until_exhausted(self, mini_corpus):
        far, near = mini_corpus
        pool = build_pool(far, near)
        plan = plan_train_aug(pool, k_per_near=6, seed=1)
        for spk in ("near0000", "near0001"):
            srcs = [j.src_utt_id for j in plan.jobs if j.out_speaker_label == spk]
            assert len(set(srcs)) == len(srcs)  # 6 far utts, k=6: no repeats
        bigger = plan_train_aug(pool, k_per_near=9, seed=1)
        assert len(bigger.jobs) == 18  # replacement kicks in past the pool size


class TestPlanCrossaug:
    def test_two_jobs_per_trial(self, mini_corpus):
        far, near = mini_corpus
        trials = [Trial(far[0].utt_id, near[0].utt_id, "nontarget")]
        plan = plan_trial_crossaug(trials, far, near)
        to_test, to_enroll = crossaug_variant_ids(trials[0])
        assert [j.out_utt_id for j in plan.jobs] == [to_test, to_enroll]
        by_out = {j.out_utt_id: j for j in plan.jobs}
        assert by_out[to_test].src_utt_id == far[0].utt_id
        assert by_out[to_test].spk_ref_utt_id == near[0].utt_id
        assert by_out[to_test].out_speaker_label == near[0].speaker_id
        assert by_out[to_enroll].src_utt_id == near[0].utt_id
        assert by_out[to_enroll].out_speaker_label == far[0].speaker_id

    def test_reciprocal_trials_need_four_jobs(self, mini_corpus):
        far, near = mini_corpus
        a, b = far[0].utt_id, far[1].utt_id
        trials = [Trial(a, b), Trial(b, a)]
        plan = plan_trial_crossaug(trials, far, far)
        assert len(plan.jobs) == 4
        assert len({j.out_utt_id for j in plan.jobs}) == 4

    def test_repeated_trial_deduplicated(self, mini_corpus):
        far, near = mini_corpus
        trials = [Trial(far[0].utt_id, near[0].utt_id)] * 3
        plan = plan_trial_crossaug(trials, far, near)
        assert len(plan.jobs) == 2

    def test_unknown_utterance(self, mini_corpus):
        far, near = mini_corpus
        with pytest.raises(ManifestError, match="trial 0"):
            plan_trial_crossaug([Trial("ghost", near[0].utt_id)], far, near)


class TestPlanFiles:
    def test_round_trip(self, mini_corpus, tmp_path):
        far, near = mini_corpus
        plan = plan_train_aug(build_pool(far, near), k_per_near=2, seed=3)
        path = tmp_path / "plan.tsv"
        save_plan(plan, path)
        back = load_plan(path)
        assert back == plan

    def test_seed_header_required(self, tmp_path):
        path = tmp_path / "plan.tsv"
        path.write_text("u1\tu2\tout\tspk\n")
        with pytest.raises(ManifestError, match="seed"):
            load_plan(path)

    def test_bad_row(self, tmp_path):
        path = tmp_path / "plan.tsv"
        path.write_text("# seed=4\nu1\tu2\tout\n")
        with pytest.raises(ManifestError):
            load_plan(path)

    def test_save_bytes_stable(self, mini_corpus, tmp_path):
        far, near = mini_corpus
        plan = plan_train_aug(build_pool(far, near), k_per_near=2, seed=3)
        a, b = tmp_path / "a.tsv", tmp_path / "b.tsv"
        save_plan(plan, a)
        save_plan(plan, b)
        assert a.read_bytes() == b.read_bytes()


class TestExecutePlan:
    def _plan(self, mini_corpus, k=2, seed=0):
        far, near = mini_corpus
        return plan_train_aug(build_pool(far, near), k_per_near=k, seed=seed), far, near

    def test_outputs_written_in_plan_order(self, mini_corpus, toy_codec, tmp_path):
        plan, far, near = self._plan(mini_corpus)
        out, failures = execute_plan(plan, far + near, toy_codec, tmp_path)
        assert failures == []
        assert [r.utt_id for r in out] == [j.out_utt_id for j in plan.jobs]
        for rec in out:
            assert rec.domain == "far"
            w = read_wav(rec.path)
            assert w.sample_rate == toy_codec.sample_rate
            assert len(w) > 0

    def test_labels_come_from_plan(self, mini_corpus, toy_codec, tmp_path):
        plan, far, near = self._plan(mini_corpus)
        out, _ = execute_plan(plan, far + near, toy_codec, tmp_path)
        by_id = {j.out_utt_id: j for j in plan.jobs}
        for rec in out:
            assert rec.speaker_id == by_id[rec.utt_id].out_speaker_label

    def test_worker_counts_agree(self, mini_corpus, toy_codec, tmp_path):
        plan, far, near = self._plan(mini_corpus, k=3)
        out1, _ = execute_plan(plan, far + near, toy_codec, tmp_path / "w1", workers=1)
        out4, _ = execute_plan(plan, far + near, toy_codec, tmp_path / "w4", workers=4)
        assert [r.utt_id for r in out1] == [r.utt_id for r in out4]
        for a, b in zip(out1, out4):
            assert (tmp_path / "w1" / f"{a.utt_id}.wav").read_bytes() == \
                   (tmp_path / "w4" / f"{b.utt_id}.wav").read_bytes()

    def test_resume_skips_existing(self, mini_corpus, toy_codec, tmp_path):
        plan, far, near = self._plan(mini_corpus)
        execute_plan(plan, far + near, toy_codec, tmp_path)
        first = {p.name: p.stat().st_mtime_ns for p in tmp_path.glob("*.wav")}
        out, failures = execute_plan(plan, far + near, toy_codec, tmp_path)
        assert failures == []
        assert len(out) == len(plan.jobs)
        second = {p.name: p.stat().st_mtime_ns for p in tmp_path.glob("*.wav")}
        assert first == second

    def test_overwrite_regenerates(self, mini_corpus, toy_codec, tmp_path):
        plan, far, near = self._plan(mini_corpus)
        execute_plan(plan, far + near, toy_codec, tmp_path)
        target = tmp_path / f"{plan.jobs[0].out_utt_id}.wav"
        good = target.read_bytes()
        target.write_bytes(b"junk")
        execute_plan(plan, far + near, toy_codec, tmp_path, overwrite=True)
        assert target.read_bytes() == good

    def test_failures_collected_not_raised(self, mini_corpus, toy_codec, tmp_path):
        plan, far, near = self._plan(mini_corpus)
        records = records_by_id(far + near)
        broken = dict(records)
        victim = plan.jobs[0].src_utt_id
        broken[victim] = UtteranceRecord(
            victim, records[victim].speaker_id, str(tmp_path / "missing.wav"), "far")
        out, failures = execute_plan(plan, broken, toy_codec, tmp_path)
        assert failures
        assert all(f.out_utt_id.startswith(victim) for f in failures)
        expected_ok = [j.out_utt_id for j in plan.jobs if j.src_utt_id != victim]
        assert [r.utt_id for r in out] == expected_ok

    def test_unknown_plan_reference(self, mini_corpus, toy_codec, tmp_path):
        plan = AugPlan([AugJob("ghost", "ghost2", "o", "s")], seed=0)
        far, near = mini_corpus
        with pytest.raises(ManifestError, match="unknown utterances"):
            execute_plan(plan, far + near, toy_codec, tmp_path)
