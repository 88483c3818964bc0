"""Record types for raw log events and the sessions built from them."""
import math
from dataclasses import dataclass, field
from typing import Optional, Dict

EVENT_KINDS = ('text', 'exercise', 'quiz')
SESSION_KINDS = EVENT_KINDS + ('mixed',)
BLOOM_GROUPS = (1, 2, 3, 4)


class EventValidationError(ValueError):
    """A raw event or session violates its field invariants."""


@dataclass(frozen=True)
class RawEvent:
    """One page access or quiz completion.

    Attributes
    ----------
    student_id : str
    timestamp : float
        UTC seconds
    subject : str
    kind : str
        one of 'text', 'exercise', 'quiz'
    bloom_group : int, optional
        Bloom group 1-4, only for exercises
    quiz_score : float, optional
        in [0, 1], only (and always) for quizzes
    quiz_duration : float, optional
        seconds, only (and always) for quizzes
    """
    student_id: str
    timestamp: float
    subject: str
    kind: str
    bloom_group: Optional[int] = None
    quiz_score: Optional[float] = None
    quiz_duration: Optional[float] = None

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise EventValidationError("Unexpected event kind <%s>. Should be one of %s." % (self.kind, EVENT_KINDS))
        if not math.isfinite(self.timestamp) or self.timestamp < 0:
            raise EventValidationError("Timestamp must be finite and non-negative, got %s." % self.timestamp)
        if self.kind == 'quiz':
            if self.quiz_score is None or self.quiz_duration is None:
                raise EventValidationError("Quiz events must carry both a score and a duration.")
            if not (0.0 <= self.quiz_score <= 1.0):
                raise EventValidationError("Quiz score must be in [0, 1], got %s." % self.quiz_score)
            if not (math.isfinite(self.quiz_duration) and self.quiz_duration >= 0):
                raise EventValidationError("Quiz duration must be non-negative, got %s." % self.quiz_duration)
        elif (self.quiz_score is not None) or (self.quiz_duration is not None):
            raise EventValidationError("Only quiz events may carry a score or a duration.")
        if self.bloom_group is not None:
            if self.kind != 'exercise':
                raise EventValidationError("Only exercise events may carry a Bloom group.")
            if self.bloom_group not in BLOOM_GROUPS:
                raise EventValidationError("Bloom group must be one of %s, got %s." % (BLOOM_GROUPS, self.bloom_group))


@dataclass(frozen=True)
class Session:
    """A merged contiguous activity interval for one student in one subject.

    Quiz sessions always hold a single quiz, and their duration is the logged quiz duration.
    """
    student_id: str
    subject: str
    start: float
    end: float
    kind: str
    duration: float
    quiz_score: Optional[float] = None
    per_kind_seconds: Dict[str, float] = field(default_factory=dict)
    bloom_seconds: Dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in SESSION_KINDS:
            raise EventValidationError("Unexpected session kind <%s>." % self.kind)
        if self.end < self.start:
            raise EventValidationError("Session end (%s) precedes its start (%s)." % (self.end, self.start))
        if self.duration < 0:
            raise EventValidationError("Session duration must be non-negative, got %s." % self.duration)
        if (self.quiz_score is not None) and not (0.0 <= self.quiz_score <= 1.0):
            raise EventValidationError("Quiz score must be in [0, 1], got %s." % self.quiz_score)

    def kind_seconds(self, kind: str) -> float:
        return self.per_kind_seconds.get(kind, 0.0)

    def bloom_group_seconds(self, group: int) -> float:
        return self.bloom_seconds.get(group, 0.0)

    @property
    def is_quiz(self) -> bool:
        return self.kind == 'quiz'
