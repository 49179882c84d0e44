from itertools import combinations

import numpy as np
import pytest

from policies.inference import (
    classify,
    classify_bundle_random,
    classify_random,
    expected_random_accuracy,
    predict_full,
)
from tests.helpers import pointer_bundle, random_bundle, random_image
from utils.data_io import generate_pointer_task, pointer_task_layout
from utils.errors import IncompatibleImageError
from utils.linear_models import LinearModel, predict_class, score
from utils.region_features import FeatureExtractor, Image, aggregate, decompose, phi


def oracle_classify(image, bundle):
    grid = decompose(image, *bundle.grid)
    trajectory = [bundle.start_region]
    for policy in bundle.sub_policies:
        x = aggregate([(i, phi(image, grid, i, bundle.extractor)) for i in trajectory], grid.size)
        scores = score(policy, x)
        candidates = [r for r in range(grid.size) if r not in trajectory]
        trajectory.append(max(candidates, key=lambda r: (scores[r], -r)))
    x = aggregate([(i, phi(image, grid, i, bundle.extractor)) for i in trajectory], grid.size)
    return int(np.argmax(score(bundle.f_theta, x))), trajectory


def test_full_budget_agrees_with_random_and_full(rng):
    bundle = random_bundle(rng, budget=16)
    for _ in range(200):
        image = random_image(rng)
        learned = classify(image, bundle)
        assert learned.predicted == classify_bundle_random(image, bundle, rng).predicted
        assert learned.predicted == predict_full(image, bundle)
        assert sorted(learned.trajectory) == list(range(16))


def test_budget_one_reads_start_region_only(rng):
    bundle = random_bundle(rng, budget=1)
    image = random_image(rng)
    result = classify(image, bundle)
    assert result.trajectory == [5]
    assert result.phi_calls == 1
    grid = decompose(image, 4, 4)
    assert result.predicted == predict_class(bundle.f_theta, aggregate([(5, phi(image, grid, 5, bundle.extractor))], 16))


def test_phi_calls_equal_budget(rng):
    for _ in range(1000):
        budget = int(rng.integers(1, 17))
        bundle = random_bundle(rng, budget=budget)
        result = classify(random_image(rng), bundle)
        assert result.phi_calls == budget
        assert len(result.trajectory) == budget
        assert len(set(result.trajectory)) == budget
        assert result.trajectory[0] == bundle.start_region


def test_classify_matches_oracle(rng):
    for _ in range(100):
        bundle = random_bundle(rng, budget=int(rng.integers(1, 7)))
        image = random_image(rng)
        result = classify(image, bundle)
        assert (result.predicted, result.trajectory) == oracle_classify(image, bundle)


def test_trace_records_every_decision(rng):
    bundle = random_bundle(rng, budget=4)
    result = classify(random_image(rng), bundle, trace=True)
    assert [len(s) for s in result.scores] == [16, 16, 16, 3]
    assert result.predicted == int(np.argmax(result.scores[-1]))


def test_classify_random_reproducible(rng):
    bundle = random_bundle(rng, budget=5)
    image = random_image(rng)
    first = classify_bundle_random(image, bundle, np.random.default_rng(42))
    second = classify_bundle_random(image, bundle, np.random.default_rng(42))
    assert first.trajectory == second.trajectory
    assert first.trajectory[0] == 5
    assert len(set(first.trajectory)) == 5
    assert first.phi_calls == 5


def test_expected_random_accuracy_exhaustive_two_by_two(rng):
    images = [random_image(rng, 8, 8) for _ in range(6)]
    items = [(image, i % 2) for i, image in enumerate(images)]
    extractor = FeatureExtractor(k=4)
    f_theta = LinearModel(rng.normal(size=(2, 17)))

    correct = total = 0
    for image, label in items:
        grid = decompose(image, 2, 2)
        for rest in combinations([1, 2, 3], 1):
            trajectory = [0, *rest]
            x = aggregate([(i, phi(image, grid, i, extractor)) for i in trajectory], 4)
            correct += predict_class(f_theta, x) == label
            total += 1

    expected = expected_random_accuracy(items, f_theta, 2, grid=(2, 2), extractor=extractor, start_region=0)
    assert expected == pytest.approx(correct / total)

    sampler = np.random.default_rng(7)
    draws = [
        classify_random(image, f_theta, 2, sampler, grid=(2, 2), extractor=extractor,
                        start_region=0).predicted == label
        for _ in range(500) for image, label in items
    ]
    assert abs(np.mean(draws) - expected) < 0.05


def test_incompatible_image(rng):
    bundle = random_bundle(rng, budget=2)
    with pytest.raises(IncompatibleImageError):
        classify(Image(np.zeros((3, 3))), bundle)


def test_expected_random_accuracy_on_pointer_task(noiseless_spec):
    # 只有随机选中目标区域才能读到类别；否则所有得分为 0，argmax 落在类别 0
    _, test = generate_pointer_task(noiseless_spec)
    bundle = pointer_bundle(pointer_task_layout(noiseless_spec), noiseless_spec.grid, 8, 4)
    expected = expected_random_accuracy(test.items, bundle.f_theta, 2, grid=(4, 4),
                                        extractor=bundle.extractor, start_region=5)
    hits_class_zero = np.mean([label == 0 for label in test.labels])
    assert expected == pytest.approx(1 / 15 + 14 / 15 * hits_class_zero)
