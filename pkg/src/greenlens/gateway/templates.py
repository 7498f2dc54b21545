"""
Templates
---------

Prompt templates for the two judgment layers and prompt rendering.

A template has four parts rendered in a fixed order: role anchoring, persona setting, task
description and answer template. The payload (a word for layer A, a keyword-context pair for
layer B), optional surrounding context and optional retrieved evidence are placed between the task
description and the answer template.
"""

from dataclasses import asdict, dataclass
import enum
import hashlib
import json
from pathlib import Path
import sys
import typing as t

from ..errors import ConfigError, PayloadMismatch
from ..segment import KeywordContextPair


if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib


class Layer(str, enum.Enum):
    A = "A"
    B = "B"


ROLE_ANCHORING = (
    "You are an external ESG analyst who focuses most on the environmental aspects of the ESG "
    "section of corporate financial reports."
)

PERSONA_SETTING = (
    "You are very familiar with the dimensions of corporate ESG, including but not limited to: "
    "green, environmental protection, environment, clean energy, energy conservation, carbon "
    "reduction, low-carbon, emission reduction, sewage treatment, air pollution, corporate "
    "environmental standards and national environmental regulations."
)

ANSWER_TEMPLATE = (
    "Please strictly follow the JSON Schema format below and return a pure JSON string without "
    'any unnecessary explanations: {"judgment":<int>, "confidence":<float>}, where judgment=1 '
    "represents affirmative and 0 represents negative. The confidence level ranges from 0 to 1."
)

LAYER_A_TASK = (
    "You are an honest analyst and won't fabricate materials. You need to determine whether the "
    "given word is a keyword related to corporate green disclosure."
)

LAYER_B_TASK = (
    "You are an honest analyst and won't fabricate materials. You will be given in sequence: "
    "(1) a word; (2) a complete sentence containing that word, with the word marked by ##. "
    "Answer judgment=1 when the sentence discloses a substantive environmental action of the "
    "corporation and judgment=0 when it is only a symbolic statement. The word mainly falls into "
    "one of four categories. "
    "(a) A word with book title marks, which is usually a document. Judge, in the given context, "
    "whether the document was issued, responded to or formulated by the corporation itself to "
    "solve its own or its subsidiaries' environmental problems. Documents such as an environmental "
    "project assessment or a pollution prevention plan of the corporation are its voluntary "
    "disclosure, whereas laws and requirements issued by the state, the government or other "
    "non-corporate entities are not, even when the corporation responds to them. "
    "(b) A chemical substance or chemical term, such as manganese, oxide or condensation reaction. "
    "Judge, in the given context, whether the corporation dealt with the substance through "
    "technical means or alleviated an environmental problem of its production and operation "
    "through this chemical means. "
    "(c) A word directly associated with environment, environmental protection or green, such as "
    "Ministry of Environmental Protection, green production or carbon emission. Judge, in the "
    "given context, whether the corporation contributed to it by issuing a specific document or "
    "adopting a specific technical method, or alleviated an environmental problem of its "
    "production and operation through it. For example, 'The corporation responds to the carbon "
    "emission policy' is just a slogan without actual action, while 'The corporation responds to "
    "the carbon emission policy and cleans the polluted gases' includes actual action. "
    "(d) Other words associated with corporations and factories, such as big chimney. Judge, in "
    "the given context, whether the corporation actually and specifically dealt with the "
    "polluting item or actually and specifically promoted the environmentally beneficial item."
)


@dataclass(frozen=True)
class PromptTemplate:
    """A four-part judgment prompt template."""

    role_anchoring: str
    persona_setting: str
    task_description: str
    answer_template: str
    template_id: str
    layer: Layer

    def __post_init__(self):
        object.__setattr__(self, "layer", Layer(self.layer))
        parts = (
            self.role_anchoring,
            self.persona_setting,
            self.task_description,
            self.answer_template,
        )
        if not all(part and part.strip() for part in parts):
            raise ConfigError(f"template {self.template_id!r} has an empty part")
        if '"judgment"' not in self.answer_template or '"confidence"' not in self.answer_template:
            raise ConfigError(
                f"template {self.template_id!r} answer template must demand the "
                '{"judgment": int, "confidence": float} schema'
            )

    def to_dict(self) -> t.Dict[str, t.Any]:
        data = asdict(self)
        data["layer"] = self.layer.value
        return data

    @classmethod
    def from_dict(cls, data: t.Mapping[str, t.Any]) -> "PromptTemplate":
        return cls(**data)

    @classmethod
    def from_file(cls, path: t.Union[str, Path]) -> "PromptTemplate":
        """Load a template from a TOML or JSON file."""
        path = Path(path)
        if path.suffix == ".toml":
            with open(path, "rb") as fp:
                data = tomllib.load(fp)
        else:
            data = json.loads(path.read_text(encoding="utf-8"))
        return cls.from_dict(data)


LAYER_A_TEMPLATE = PromptTemplate(
    role_anchoring=ROLE_ANCHORING,
    persona_setting=PERSONA_SETTING,
    task_description=LAYER_A_TASK,
    answer_template=ANSWER_TEMPLATE,
    template_id="layer-a-v1",
    layer=Layer.A,
)

LAYER_B_TEMPLATE = PromptTemplate(
    role_anchoring=ROLE_ANCHORING,
    persona_setting=PERSONA_SETTING,
    task_description=LAYER_B_TASK,
    answer_template=ANSWER_TEMPLATE,
    template_id="layer-b-v1",
    layer=Layer.B,
)


Payload = t.Union[str, KeywordContextPair]


@dataclass(frozen=True)
class PromptInput:
    """
    One item to judge.

    Attributes:
        payload: A word (layer A) or a keyword-context pair (layer B).
        context: Neighboring sentences shown before the pair.
        retrieved: Retrieved evidence passages.
        tag: Extra fixture key qualifier, e.g. the ablation arm.
    """

    payload: Payload
    context: t.Tuple[str, ...] = ()
    retrieved: t.Tuple[str, ...] = ()
    tag: str = ""

    @property
    def item_id(self) -> str:
        if isinstance(self.payload, KeywordContextPair):
            return self.payload.pair_id
        return self.payload

    @property
    def fixture_keys(self) -> t.Tuple[str, ...]:
        """Item-level fixture keys, most specific first."""
        if self.tag:
            return (f"{self.tag}:{self.item_id}", self.item_id)
        return (self.item_id,)


def render_prompt(
    template: PromptTemplate,
    payload: Payload,
    retrieved: t.Optional[t.Sequence[str]] = None,
    *,
    context: t.Optional[t.Sequence[str]] = None,
) -> str:
    """
    Render a judgment prompt.

    Args:
        template: Prompt template.
        payload: A word for a layer A template or a keyword-context pair for a layer B template.
        retrieved: Retrieved passages rendered in a delimited evidence block.

    Keyword Arguments:
        context: Neighboring sentences rendered in a context block (layer B only).

    Raises:
        PayloadMismatch: If the payload does not match the template layer.
    """
    if template.layer is Layer.A:
        if not isinstance(payload, str) or not payload:
            raise PayloadMismatch(
                f"layer A template {template.template_id!r} expects a word, "
                f"got {type(payload).__name__}"
            )
        if context:
            raise PayloadMismatch("context sentences are only supported for layer B")
        body = [f"Word: {payload}"]
    else:
        if not isinstance(payload, KeywordContextPair):
            raise PayloadMismatch(
                f"layer B template {template.template_id!r} expects a keyword-context pair, "
                f"got {type(payload).__name__}"
            )
        body = [f"(1) Word: {payload.keyword}", f"(2) Sentence: {payload.sentence}"]

    sections = [
        f"[Role Anchoring]\n{template.role_anchoring}",
        f"[Persona Setting]\n{template.persona_setting}",
        f"[Task Description]\n{template.task_description}",
    ]
    if context:
        sections.append("[Context]\n" + "\n".join(context))
    sections.append("[Input]\n" + "\n".join(body))
    if retrieved:
        passages = "\n".join(
            f'<passage index="{i}">\n{text}\n</passage>' for i, text in enumerate(retrieved, 1)
        )
        sections.append(f"[Evidence]\n<evidence>\n{passages}\n</evidence>")
    sections.append(f"[Answer Template]\n{template.answer_template}")

    return "\n\n".join(sections)


def render_input(template: PromptTemplate, item: PromptInput) -> str:
    """Render the prompt of a :class:`PromptInput`."""
    return render_prompt(
        template, item.payload, item.retrieved or None, context=item.context or None
    )


def prompt_hash(prompt: str) -> str:
    """Return the journal key of a rendered prompt."""
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:32]
