"""Synthetic classification data and restaurant-page wrapper tasks."""
import pytest
from pydantic import ValidationError

from cotest.core import load_dataset
from cotest.harness.synthetic import (
    AmbiguityMode,
    ClassificationSpec,
    WrapperSpec,
    generate_synthetic_classification,
    generate_synthetic_wrapper,
    generate_wrapper_task,
)
from cotest.wrapper.loop import load_wrapper_task
from cotest.wrapper.rules import Direction, learn_rule, locate

SMALL = ClassificationSpec(signal_features=8, noise_features=12, size=120, seed=3)


class TestClassification:
    def test_same_seed_same_files(self, tmp_path):
        generate_synthetic_classification(SMALL, tmp_path / "a")
        generate_synthetic_classification(SMALL, tmp_path / "b")
        for name in ("data.txt", "views.txt"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_written_files_load_back(self, tmp_path):
        ds = generate_synthetic_classification(SMALL, tmp_path)
        loaded = load_dataset(tmp_path / "data.txt", tmp_path / "views.txt")
        assert len(loaded) == 120
        assert loaded.view_spec.ids == ["v1", "v2"]
        assert [x.label for x in loaded.examples] == [x.label for x in ds.examples]

    def test_views_are_disjoint(self):
        ds = generate_synthetic_classification(SMALL)
        v1, v2 = (ds.view_spec.view(v).features for v in ("v1", "v2"))
        assert not v1 & v2
        assert len(v1) == len(v2) == 20
        assert ds.n_features == 40

    def test_each_view_determines_the_label_without_noise(self):
        ds = generate_synthetic_classification(SMALL)
        quarter = SMALL.signal_features // 4
        for x in ds.examples:
            for v, view_id in enumerate(ds.view_spec.ids):
                base = v * SMALL.view_width
                present = {i - base for i in x.views[view_id].indices}
                a = any(i < quarter for i in present)
                b = any(2 * quarter <= i < 3 * quarter for i in present)
                assert x.label == int(a and b)

    def test_word_budget_per_view(self):
        ds = generate_synthetic_classification(SMALL)
        assert (SMALL.words_per_attribute, SMALL.noise_words) == (1, 20)
        for x in ds.examples:
            for v, view_id in enumerate(ds.view_spec.ids):
                vec = x.views[view_id]
                signal = sum(c for i, c in vec.entries.items() if i - v * SMALL.view_width < SMALL.signal_features)
                assert signal == 2
                assert sum(vec.values) == 2 + 20

    def test_both_classes_appear(self):
        labels = [x.label for x in generate_synthetic_classification(SMALL).examples]
        assert 0 < sum(labels) < len(labels)

    def test_label_noise_flips_labels(self):
        clean = generate_synthetic_classification(SMALL)
        noisy = generate_synthetic_classification(SMALL.model_copy(update={"noise_rate": 0.3}))
        assert [x.label for x in clean.examples] != [x.label for x in noisy.examples]

    def test_spec_validation(self):
        with pytest.raises(ValidationError):
            ClassificationSpec(signal_features=10)
        with pytest.raises(ValidationError):
            ClassificationSpec(redundancy=[1.0, 0.5, 0.2])
        with pytest.raises(ValidationError):
            ClassificationSpec(redundancy=1.5)

    def test_weak_redundancy_per_view(self):
        spec = ClassificationSpec(signal_features=8, noise_features=4, size=20, redundancy=[1.0, 0.0])
        assert spec.redundancies == [1.0, 0.0]
        assert len(generate_synthetic_classification(spec)) == 20


class TestWrapperTasks:
    def test_spec_needs_two_documents_per_fold(self):
        with pytest.raises(ValidationError):
            WrapperSpec(size=30, folds=20)

    def test_modes_cycle_over_tasks(self):
        spec = WrapperSpec(tasks=3, ambiguity=["prefix-variant", "distractor-order"], size=40)
        assert [spec.mode_for(t) for t in range(3)] == [
            AmbiguityMode.PREFIX_VARIANT,
            AmbiguityMode.DISTRACTOR_ORDER,
            AmbiguityMode.PREFIX_VARIANT,
        ]

    def test_every_page_locates_a_phone_number(self):
        task = generate_wrapper_task(WrapperSpec(size=40, seed=1), 0)
        assert task.name == "task_00_off" and task.item == "Phone"
        for doc in task.documents:
            assert doc.tokens[doc.start].text == "("
            assert doc.tokens[doc.start - 1].text == "<i>"

    def test_deterministic_files(self, tmp_path):
        spec = WrapperSpec(tasks=2, size=40, seed=7)
        generate_synthetic_wrapper(spec, tmp_path / "a")
        generate_synthetic_wrapper(spec, tmp_path / "b")
        names = sorted(p.name for p in (tmp_path / "a").glob("*.tsv"))
        assert names == ["task_00_off.tsv", "task_01_off.tsv"]
        for name in names:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        loaded = load_wrapper_task(tmp_path / "a" / names[0])
        assert len(loaded) == 40

    def test_prefix_variants_need_a_generalized_landmark(self):
        task = generate_wrapper_task(WrapperSpec(size=200, ambiguity="prefix-variant", seed=2), 0)
        prefixes = {doc.tokens[doc.start - 3].text for doc in task.documents}
        assert "Phone" in prefixes and len(prefixes) >= 2
        picked = {}
        for doc in task.documents:
            picked.setdefault(doc.tokens[doc.start - 3].text, doc)
        training = [(doc.tokens, doc.start) for doc in picked.values()]
        rule = learn_rule(training, Direction.FORWARD)
        assert all(locate(rule, tokens) == target for tokens, target in training)
        assert "_Capitalized_" in str(rule)

    def test_rare_layouts_keep_their_share(self):
        task = generate_wrapper_task(WrapperSpec(size=1000, ambiguity="distractor-order", rare_share=0.05, seed=4), 0)
        old = sum(1 for d in task.documents if "Old" in d.tokens.texts(0, d.start))
        late = sum(1 for d in task.documents if d.tokens.texts(d.start).count("(") > 1)
        assert 10 <= old <= 45 and 10 <= late <= 45
        assert old + late <= 90

    def test_rare_share_bounds(self):
        with pytest.raises(ValidationError):
            WrapperSpec(rare_share=0.0)
        with pytest.raises(ValidationError):
            WrapperSpec(rare_share=1.0)
