"""Annotation bundle validation and deterministic rendering."""

import pytest

from icforge.annotations import (
    ActivityCandidate,
    CaptionAnnotation,
    DenseCaptionAnnotation,
    DifferenceAnnotation,
    EgoAnnotation,
    EgoEvent,
    SceneViewAnnotation,
    ShotAnnotation,
    StoryAnnotation,
    StoryImage,
    VisualAnnotationBundle,
    bundle_from_obj,
    bundle_to_obj,
    render_annotation,
)
from icforge.errors import SchemaMismatchError
from icforge.tasks import TaskId


def bundle(task: TaskId, payload, media=("M1",)) -> VisualAnnotationBundle:
    return VisualAnnotationBundle(bundle_id="b1", task=task,
                                  media_ids=tuple(media), payload=payload)


class TestDenseCaptions:
    def test_two_line_block(self):
        payload = DenseCaptionAnnotation(
            timestamps=((0, 19), (17, 60)),
            sentences=("A young woman is seen standing in a room and leads into her dancing.",
                       "The girl dances around the room while the camera captures her movements."))
        text = render_annotation(bundle(TaskId.DC, payload))
        lines = text.split("\n")
        assert len(lines) == 2
        assert lines[0] == "timestamps: [[0, 19], [17, 60]]"
        assert lines[1].startswith('sentences: ["A young woman')

    def test_timestamp_validation(self):
        with pytest.raises(SchemaMismatchError):
            bundle(TaskId.DC, DenseCaptionAnnotation(((10, 5),), ("x",))).validate()
        with pytest.raises(SchemaMismatchError):
            bundle(TaskId.DC, DenseCaptionAnnotation(((-1, 5),), ("x",))).validate()

    def test_count_mismatch(self):
        with pytest.raises(SchemaMismatchError):
            bundle(TaskId.DC, DenseCaptionAnnotation(((0, 5),), ("a", "b"))).validate()

    def test_injective_on_distinct_timestamp_lists(self):
        sentences = ("only sentence",)
        seen = set()
        cases = [((0, 19),), ((0, 20),), ((1, 19),), ((0, 19), (17, 60)),
                 ((0, 19), (17, 61)), ((0, 1), (17, 60))]
        for stamps in cases:
            payload = DenseCaptionAnnotation(tuple(stamps), sentences * len(stamps))
            seen.add(render_annotation(bundle(TaskId.DC, payload)))
        assert len(seen) == len(cases)


class TestEgoEvents:
    def test_block_layout_and_trailing_semicolon(self):
        payload = EgoAnnotation((
            EgoEvent(102, "man Y stands beside C",
                     ("white couch with pillows on it", "a clock on the wall")),
            EgoEvent(103, "The cameraman turns around", ()),
        ))
        text = render_annotation(bundle(TaskId.E4D, payload))
        blocks = text.split("\n\n")
        assert blocks[0] == ("timestamp: 102\n"
                             "description: man Y stands beside C\n"
                             "objects: white couch with pillows on it; a clock on the wall;")
        # empty object list: the objects line is omitted entirely
        assert blocks[1] == "timestamp: 103\ndescription: The cameraman turns around"

    def test_events_must_be_sorted(self):
        with pytest.raises(SchemaMismatchError):
            bundle(TaskId.E4D, EgoAnnotation((EgoEvent(5, "b"), EgoEvent(1, "a")))).validate()


class TestDifferences:
    def test_single_sentence_single_line(self):
        payload = DifferenceAnnotation(("the car in the corner is gone",))
        assert render_annotation(bundle(TaskId.SD, payload)) == "the car in the corner is gone"

    def test_sentences_blank_line_separated(self):
        payload = DifferenceAnnotation(("first", "second"))
        assert render_annotation(bundle(TaskId.SD, payload)) == "first\n\nsecond"


class TestOtherPayloads:
    def test_captions_with_objects(self):
        payload = CaptionAnnotation(("a dog on grass",), ("dog: [1, 2, 3, 4]",))
        text = render_annotation(bundle(TaskId.LA_I, payload))
        assert text == 'captions: ["a dog on grass"]\nobjects: ["dog: [1, 2, 3, 4]"]'

    def test_captions_empty_objects_omitted(self):
        payload = CaptionAnnotation(("a dog on grass",))
        assert render_annotation(bundle(TaskId.LA_I, payload)) == 'captions: ["a dog on grass"]'

    def test_story_blocks(self):
        payload = StoryAnnotation(
            title="Moreton Bay Fig 1877",
            description="Believed to be the largest",
            images=(StoryImage("Santa Barbara", ("santabarbara",), ("the roots were huge .",)),
                    StoryImage("Untagged", (), ())))
        text = render_annotation(bundle(TaskId.VIST, payload))
        assert text.startswith("title: Moreton Bay Fig 1877\ndescription: Believed")
        assert 'annotations: ["the roots were huge ."]' in text
        # empty tags/annotations are omitted, not rendered as empty lists
        assert text.endswith("image: Untagged")

    def test_scene_views_with_activities(self):
        payload = SceneViewAnnotation(
            ("this is a round sink. it is next to a toilet.",),
            (ActivityCandidate("Hold a party", "A college student."),
             ActivityCandidate("Yoga Session", "Yoga Instructor")))
        text = render_annotation(bundle(TaskId.IEP, payload))
        assert text.startswith("sentences: this is a round sink.")
        assert ("Candidate activity and the role who want to do this activity:"
                "Hold a party - Human role: A college student.") in text
        assert text.endswith("Yoga Session - Human role: Yoga Instructor")

    def test_shots_numbered(self):
        payload = ShotAnnotation(("Monica says something to Ross.",
                                  "Rachel looks at him."))
        assert render_annotation(bundle(TaskId.TVC, payload)) == (
            "1. Monica says something to Ross.\n\n2. Rachel looks at him.")

    def test_payload_task_mismatch(self):
        with pytest.raises(SchemaMismatchError):
            bundle(TaskId.DC, ShotAnnotation(("x",))).validate()


class TestBundleJson:
    def test_round_trip_all_kinds(self):
        bundles = [
            bundle(TaskId.LA_I, CaptionAnnotation(("c",), ("o",))),
            bundle(TaskId.SD, DifferenceAnnotation(("d",)), media=("M1", "M2")),
            bundle(TaskId.VIST, StoryAnnotation("t", "d", (StoryImage("i", ("x",), ("a",)),))),
            bundle(TaskId.DC, DenseCaptionAnnotation(((0, 5),), ("s",))),
            bundle(TaskId.E4D, EgoAnnotation((EgoEvent(1, "e", ("o",)),))),
            bundle(TaskId.IEP, SceneViewAnnotation(("s",), (ActivityCandidate("a", "r"),))),
            bundle(TaskId.TVC, ShotAnnotation(("s1", "s2"))),
        ]
        for original in bundles:
            assert bundle_from_obj(bundle_to_obj(original)) == original
