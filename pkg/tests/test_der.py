import numpy as np
import pytest
from oracles import brute_force_total, grid_der
from pydantic import ValidationError

from vbdiar.der import (
    DerReport,
    Turn,
    TurnList,
    aggregate_reports,
    compute_der,
    map_speakers,
)
from vbdiar.errors import DataFormatError, UsageError


def turns(recording_id: str, *items: tuple[float, float, str]) -> TurnList:
    return TurnList(
        recording_id=recording_id,
        turns=tuple(Turn(start=s, end=e, speaker=spk) for s, e, spk in items),
    )


REFERENCE = turns("rec", (0.0, 5.0, "A"), (5.0, 10.0, "B"))


# ========================
# Реплики
# ========================


def test_turn_validation():
    with pytest.raises(ValidationError):
        Turn(start=2.0, end=2.0, speaker="A")
    with pytest.raises(ValidationError):
        Turn(start=-1.0, end=2.0, speaker="A")


def test_turn_list_sorted_and_rejects_overlap():
    ordered = turns("rec", (5.0, 6.0, "B"), (0.0, 5.0, "A"))
    assert [t.speaker for t in ordered.turns] == ["A", "B"]
    assert ordered.speakers == ["A", "B"]
    with pytest.raises(ValidationError):
        turns("rec", (0.0, 5.0, "A"), (4.0, 6.0, "B"))


def test_from_labels_merges_touching_segments():
    result = TurnList.from_labels(
        "rec",
        [(0.0, 1.0), (1.0, 2.5), (2.5, 3.0), (4.0, 5.0)],
        [0, 0, 1, 1],
    )
    assert [(t.start, t.end, t.speaker) for t in result.turns] == [
        (0.0, 2.5, "spk0"),
        (2.5, 3.0, "spk1"),
        (4.0, 5.0, "spk1"),
    ]
    with pytest.raises(DataFormatError):
        TurnList.from_labels("rec", [(0.0, 1.0)], [0, 1])


def test_from_labels_overlap_is_data_error():
    with pytest.raises(DataFormatError, match="rec"):
        TurnList.from_labels("rec", [(0.0, 2.0), (1.5, 3.0)], [0, 1])
    with pytest.raises(DataFormatError):
        TurnList.from_labels("rec", [(1.0, 1.0)], [0])


# ========================
# DER
# ========================


def test_identical_hypothesis():
    assert compute_der(REFERENCE, REFERENCE).der == 0.0


def test_swapped_names():
    swapped = turns("rec", (0.0, 5.0, "B"), (5.0, 10.0, "A"))
    assert compute_der(REFERENCE, swapped).der == 0.0


def test_shifted_boundary():
    hypothesis = turns("rec", (0.0, 6.0, "A"), (6.0, 10.0, "B"))
    report = compute_der(REFERENCE, hypothesis, collar=0.25)
    assert report.scored_time == 9.0
    assert report.speaker_error_time == 0.75
    assert report.miss_time == 0.0
    assert report.false_alarm_time == 0.0
    assert report.der == 0.75 / 9.0


def test_default_collar_from_settings():
    hypothesis = turns("rec", (0.0, 6.0, "A"), (6.0, 10.0, "B"))
    assert compute_der(REFERENCE, hypothesis) == compute_der(REFERENCE, hypothesis, collar=0.25)


def test_recording_edge_keeps_inner_half_collar():
    report = compute_der(turns("rec", (0.0, 1.0, "A")), turns("rec", (0.0, 1.0, "x")), collar=0.25)
    assert report.scored_time == pytest.approx(0.5)


def test_miss_and_false_alarm():
    reference = turns("rec", (0.0, 4.0, "A"), (6.0, 10.0, "B"))
    hypothesis = turns("rec", (0.0, 3.0, "x"), (5.0, 10.0, "y"))
    report = compute_der(reference, hypothesis, collar=0.0)
    assert report.scored_time == pytest.approx(8.0)
    assert report.miss_time == pytest.approx(1.0)
    assert report.false_alarm_time == pytest.approx(1.0)
    assert report.speaker_error_time == 0.0


def test_split_hypothesis_turn_is_invariant():
    hypothesis = turns("rec", (0.0, 6.0, "A"), (6.0, 10.0, "B"))
    split = turns("rec", (0.0, 2.0, "A"), (2.0, 6.0, "A"), (6.0, 10.0, "B"))
    assert compute_der(REFERENCE, split).der == pytest.approx(compute_der(REFERENCE, hypothesis).der)


def test_collar_monotonicity():
    reference = turns("rec", (0.0, 3.0, "A"), (3.5, 7.0, "B"), (7.0, 9.0, "A"))
    hypothesis = turns("rec", (0.2, 3.4, "x"), (3.4, 6.0, "y"), (6.0, 9.5, "x"))
    reports = [compute_der(reference, hypothesis, collar=c) for c in (0.0, 0.1, 0.25, 0.5)]
    for small, large in zip(reports, reports[1:]):
        assert large.scored_time <= small.scored_time + 1e-12
        assert large.miss_time <= small.miss_time + 1e-12
        assert large.false_alarm_time <= small.false_alarm_time + 1e-12
        assert large.speaker_error_time <= small.speaker_error_time + 1e-12


def test_errors():
    with pytest.raises(DataFormatError):
        compute_der(REFERENCE, turns("other", (0.0, 1.0, "A")))
    with pytest.raises(DataFormatError):
        compute_der(turns("rec", (0.0, 0.4, "A")), turns("rec", (0.0, 0.4, "A")), collar=0.25)
    with pytest.raises(UsageError):
        compute_der(REFERENCE, REFERENCE, collar=-0.1)


def random_turns(rng: np.random.Generator, recording_id: str, names: str) -> TurnList:
    count = int(rng.integers(1, 7))
    points = np.sort(rng.choice(np.arange(1, 400), size=2 * count, replace=False)) / 100
    return turns(
        recording_id,
        *((float(points[2 * i]), float(points[2 * i + 1]), str(rng.choice(list(names)))) for i in range(count)),
    )


def test_agrees_with_grid_scorer():
    rng = np.random.default_rng(2024)
    checked = 0
    while checked < 100:
        reference = random_turns(rng, "rec", "AB")
        hypothesis = random_turns(rng, "rec", "xy")
        try:
            report = compute_der(reference, hypothesis, collar=0.25)
        except DataFormatError:
            continue
        assert report.der == pytest.approx(grid_der(reference, hypothesis, 0.25), abs=0.002)
        checked += 1


def spanning_turns(rng: np.random.Generator, recording_id: str, names: str, end: float) -> TurnList:
    cuts = np.sort(rng.choice(np.arange(1, int(end * 100)), size=int(rng.integers(1, 8)), replace=False)) / 100
    points = [0.0, *cuts.tolist(), end]
    spans = [(a, b) for a, b in zip(points, points[1:], strict=False)]
    # Первая и последняя реплики остаются, внутри бывают паузы
    kept = [sp for i, sp in enumerate(spans) if i in (0, len(spans) - 1) or rng.random() < 0.7]
    return turns(recording_id, *((a, b, str(rng.choice(list(names)))) for a, b in kept))


def to_annotation(turn_list: TurnList):
    from pyannote.core import Annotation, Segment

    annotation = Annotation(uri=turn_list.recording_id)
    for i, turn in enumerate(turn_list.turns):
        annotation[Segment(turn.start, turn.end), i] = turn.speaker
    return annotation


@pytest.mark.parametrize("collar", [0.0, 0.25])
def test_agrees_with_pyannote_metrics(collar):
    pytest.importorskip("pyannote.metrics")
    from pyannote.metrics.diarization import DiarizationErrorRate

    # У pyannote воротник задаётся полной шириной
    metric = DiarizationErrorRate(collar=2 * collar, skip_overlap=False)
    rng = np.random.default_rng(77)
    checked = 0
    while checked < 50:
        end = float(rng.integers(200, 600)) / 100
        reference = spanning_turns(rng, "rec", "AB", end)
        hypothesis = spanning_turns(rng, "rec", "xyz", end)
        try:
            report = compute_der(reference, hypothesis, collar=collar)
        except DataFormatError:
            continue
        expected = metric(to_annotation(reference), to_annotation(hypothesis))
        assert report.der == pytest.approx(expected, abs=1e-6)
        checked += 1


# ========================
# Отображение дикторов
# ========================


def test_map_speakers_identity_and_swap():
    assert map_speakers(REFERENCE, REFERENCE) == {"A": "A", "B": "B"}
    swapped = turns("rec", (0.0, 5.0, "B"), (5.0, 10.0, "A"))
    assert map_speakers(REFERENCE, swapped) == {"B": "A", "A": "B"}


def test_map_speakers_three_reference_two_hypothesis():
    reference = turns("rec", (0.0, 2.0, "A"), (2.0, 5.0, "B"), (5.0, 9.0, "C"))
    hypothesis = turns("rec", (0.0, 3.0, "x"), (3.0, 9.0, "y"))
    mapping = map_speakers(reference, hypothesis)
    assert mapping == {"x": "A", "y": "C"}
    overlap = np.array([[2.0, 0.0], [1.0, 2.0], [0.0, 4.0]])
    assert overlap[0, 0] + overlap[2, 1] == brute_force_total(overlap)


def test_map_speakers_tie_prefers_lexicographic_order():
    reference = turns("rec", (0.0, 1.0, "A"), (1.0, 2.0, "B"))
    hypothesis = turns("rec", (0.0, 2.0, "x"))
    assert map_speakers(reference, hypothesis) == {"x": "A"}


def test_large_speaker_sets_use_assignment_solver():
    names = [f"s{i}" for i in range(9)]
    reference = turns("rec", *((float(i), float(i + 1), n) for i, n in enumerate(names)))
    renamed = turns("rec", *((float(i), float(i + 1), f"h{8 - i}") for i in range(9)))
    assert compute_der(reference, renamed, collar=0.0).der == pytest.approx(0.0)
    assert map_speakers(reference, renamed) == {f"h{8 - i}": n for i, n in enumerate(names)}


# ========================
# Сводка
# ========================


def test_aggregate_population_std():
    reports = [
        DerReport(recording_id="a", scored_time=10.0, miss_time=0.0, false_alarm_time=0.0, speaker_error_time=1.0),
        DerReport(recording_id="b", scored_time=10.0, miss_time=0.0, false_alarm_time=0.0, speaker_error_time=3.0),
    ]
    aggregate = aggregate_reports(reports)
    assert aggregate.mean_der == pytest.approx(0.2)
    assert aggregate.std_der == pytest.approx(0.1)
    assert aggregate.pooled_der == pytest.approx(0.2)
    assert aggregate_reports(reports[:1]).std_der == 0.0
    with pytest.raises(UsageError):
        aggregate_reports([])
