"""
Induction, intervention and judge prompts, and parsing of induced rules.

Template texts are fixed: tests pin them byte for byte.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Optional

from .errors import PreconditionError
from .models import Game
from .transcripts import TranscriptDoc

TRANSCRIPT_SLOT = "(...insert game transcripts here...)"
RULE_MARKER = "Induced Rule:"
SUMMARY_TOKEN_CAP = 1000

INDUCTION_TEMPLATE = (
    "(Background Information)\n"
    "You are an agent tasked with discovering how a certain game works. The rules of the game are unknown "
    "to you in advance. However, you are given a full gameplay transcript from a single episode, showing the "
    "actions taken and whether they resulted in success or failure. The rule used in each episode is internally "
    "consistent, but may differ across episodes. Your goal is to infer this rule by observing what patterns "
    "emerge in the examples.\n"
    "(Instruction)\n"
    "Carefully analyze the episode shown below. Use only the observed behavior and outcomes to deduce the "
    "underlying rule. Be precise and concise. Your response should summarize the rule as clearly as possible, "
    "in natural language. Do not speculate beyond the given examples.\n"
    "\n"
    "Do not list the examples again. Do not include uncertainty statements (\"it might be...\", \"perhaps...\"). "
    "Just state the rule that best explains the episode.\n"
    "\n"
    f"{TRANSCRIPT_SLOT}\n"
    "\n"
    "(Output Format)\n"
    "Your response should follow this format:\n"
    f"{RULE_MARKER} <your concise natural language description>"
)

DECOMPOSITION_TEMPLATE = (
    "You are given a complex reasoning task. Follow the structured reasoning steps below. Each step includes "
    "internal sub-steps to ensure clarity and alignment with the task goal.\n"
    "\n"
    "Step 1: Identify and organize relevant entities.\n"
    "\n"
    "Break the input into interpretable components. Answer the following sub-questions:\n"
    "\n"
    "-- What are the basic elements in the input (e.g., cards, pieces, dice)?\n"
    "\n"
    "-- What attributes are associated with each element (e.g., suit, number, position, color)?\n"
    "\n"
    "-- Are there groupings, repetitions, or orderings that might matter (e.g., same suit, consecutive values)?\n"
    "\n"
    "-- Represent the input in a structured, canonical form for downstream rule inference.\n"
    "\n"
    "Step 2: Induce candidate rule(s) from prior context.\n"
    "\n"
    "Based on previous examples or observed patterns, hypothesize a rule that could explain the current or "
    "past cases. Sub-steps:\n"
    "\n"
    "-- Look for shared properties among successful examples (e.g., all include a prime number sequence).\n"
    "\n"
    "-- Consider combinations of attributes that might define a category (e.g., \"all red cards\", "
    "\"adjacent positions\", \"triplets\").\n"
    "\n"
    "-- Formulate one or more abstract rules using natural language or logical expressions.\n"
    "\n"
    "-- If multiple rules seem possible, rank or explain them by plausibility.\n"
    "\n"
    "Step 3: Verify the inferred rule against the current input.\n"
    "\n"
    "Apply your proposed rule(s) to this instance. Proceed with the following:\n"
    "\n"
    "-- Does the structured input satisfy the rule exactly?\n"
    "\n"
    "-- If partially satisfied, explain which components match or fail.\n"
    "\n"
    "-- If none match, state clearly why the rule does not apply.\n"
    "\n"
    "-- Conclude with a binary result (rule matched / not matched), and explain how the final decision is reached."
)

SOLVING_TEMPLATE = (
    "Getting a sense of the setup\n"
    "\n"
    "I'm looking over the current configuration. There’s a set of game elements—cards, pieces, or dice—arranged "
    "within a defined structure. I begin by scanning each entity and noting its type, position, and any immediate "
    "groupings. I try to understand what roles these elements might play, and whether any of them are marked, "
    "repeated, or stand out visually. Once I have a general grasp, I start mapping the layout mentally so I can "
    "refer back to it during analysis.\n"
    "\n"
    "Spotting initial patterns\n"
    "\n"
    "As I move through the input, some patterns begin to emerge. I see repeated forms—like similar numbers, "
    "mirrored types, or alternating colors. In some cases, specific alignments appear intentional, like a row of "
    "matching elements or a cluster that resembles a known configuration. I note these early signals and consider "
    "whether they resemble any previous examples I've worked with. These patterns may not yet define a rule, but "
    "they give me a starting point.\n"
    "\n"
    "Tracking how things evolve\n"
    "\n"
    "Now I focus on changes—movements, replacements, or newly introduced elements. I observe which parts of the "
    "structure are dynamic and whether these shifts maintain or break previous patterns. For example, if a card "
    "swaps position or a piece moves diagonally, I check if that action matches others I've seen. I also look at "
    "directionality and symmetry: are changes centered around a pivot? Are actions constrained to certain zones? "
    "All of this helps me refine how the system behaves.\n"
    "\n"
    "Interpreting the intent\n"
    "\n"
    "I try to understand not just what changed, but why. The observed actions feel deliberate, so I begin "
    "thinking about what constraints or goals might be shaping them. Perhaps certain moves are legal only under "
    "hidden conditions, or some combinations gain value due to an unknown rule. I think about whether the system "
    "rewards alignment, diversity, or some balance in composition. This lets me go beyond just pattern "
    "matching—I’m starting to infer purpose.\n"
    "\n"
    "Refining the hypothesis\n"
    "\n"
    "Now I compare my current case with earlier examples. I'm looking for consistency: do similar setups always "
    "lead to the same outcome? I check whether specific attributes—like color sequences or paired "
    "entities—reappear under the same conditions. If they do, my hypothesis strengthens. If not, I adjust. I also "
    "check for edge cases that might help distinguish between competing rules. The more I refine, the clearer "
    "the rule's shape becomes.\n"
    "\n"
    "Committing to a conclusion\n"
    "\n"
    "With all this in mind, I’m ready to decide. The current setup aligns with the rule I’ve been building. I see "
    "enough evidence—through repetition, structure, and behavior—to commit to an answer. There's no need for math "
    "here; it’s the alignment between elements and rules that matters. I finalize my judgment and prepare to "
    "apply this same logic again if needed."
)

SUMMARIZATION_TEMPLATE = (
    "You are given a reasoning task. Please approach it step by step, with each step clear and concise.\n"
    "If the answer becomes evident before completing all steps, stop immediately and provide the final answer. "
    "DO NOT continue reasoning once the question is resolved.\n"
    f"Your total output must stay within {SUMMARY_TOKEN_CAP} tokens.\n"
    "Excessive or unnecessary reasoning beyond this limit will be considered invalid."
)

JUDGE_TEMPLATE = (
    "You are given a reasoning task involving [GAME TYPE].\n"
    "\n"
    "Below is the ground-truth rule and a model’s hypothesis.\n"
    "\n"
    "Decide whether the hypothesis matches the ground-truth rule in semantics.\n"
    "\n"
    "Ground-truth rule: [INSERT TRUE RULE]\n"
    "\n"
    "Model-induced rule: [INSERT MODEL RULE]\n"
    "\n"
    "Answer with: \"Yes, the induced rule matches the ground-truth.\" or \"No, the induced rule does not match.\" "
    "Briefly explain your reasoning in one sentence."
)

JUDGE_PLACEHOLDERS = ("[GAME TYPE]", "[INSERT TRUE RULE]", "[INSERT MODEL RULE]")


class Intervention(Enum):
    NONE = "none"
    DECOMPOSITION = "decomposition"
    SOLVING = "solving"
    SUMMARIZATION = "summarization"
    COMBINED = "combined"

    @classmethod
    def parse(cls, value: str) -> 'Intervention':
        try:
            return cls(value.strip().lower())
        except ValueError:
            raise PreconditionError(f"Unknown intervention '{value}' (expected one of {[i.value for i in cls]})")


PREAMBLES = {
    Intervention.NONE: (),
    Intervention.DECOMPOSITION: (DECOMPOSITION_TEMPLATE,),
    Intervention.SOLVING: (SOLVING_TEMPLATE,),
    Intervention.SUMMARIZATION: (SUMMARIZATION_TEMPLATE,),
    Intervention.COMBINED: (DECOMPOSITION_TEMPLATE, SOLVING_TEMPLATE, SUMMARIZATION_TEMPLATE),
}

CAPPED = frozenset({Intervention.SUMMARIZATION, Intervention.COMBINED})


@dataclass(frozen=True)
class PromptBundle:
    system_or_preamble: str
    transcript: TranscriptDoc
    instruction: str
    intervention: Intervention
    max_output_tokens: Optional[int] = None

    def __post_init__(self):
        if self.intervention in CAPPED and self.max_output_tokens != SUMMARY_TOKEN_CAP:
            raise PreconditionError(f"{self.intervention.value} prompts are capped at {SUMMARY_TOKEN_CAP} tokens")
        if self.max_output_tokens is not None and self.max_output_tokens <= 0:
            raise PreconditionError("max_output_tokens must be positive")

    @property
    def prompt_text(self) -> str:
        if not self.system_or_preamble:
            return self.instruction
        return f"{self.system_or_preamble}\n\n{self.instruction}"

    def to_audit_dict(self) -> Dict[str, Any]:
        return {
            "episode_seed": self.transcript.episode_ref.to_dict() if self.transcript.episode_ref else None,
            "intervention": self.intervention.value,
            "prompt_text": self.prompt_text,
            "max_output_tokens": self.max_output_tokens,
        }


@dataclass(frozen=True)
class InducedRule:
    text: str
    raw_response: str
    parse_ok: bool


def build_induction_prompt(doc: TranscriptDoc, intervention: Intervention = Intervention.NONE) -> PromptBundle:
    return PromptBundle(
        system_or_preamble="\n\n".join(PREAMBLES[intervention]),
        transcript=doc,
        instruction=INDUCTION_TEMPLATE.replace(TRANSCRIPT_SLOT, doc.text),
        intervention=intervention,
        max_output_tokens=SUMMARY_TOKEN_CAP if intervention in CAPPED else None,
    )


def game_display_name(game: Game) -> str:
    return game.display_name


def build_judge_prompt(game: Game, ground_truth_rule: str, induced: InducedRule) -> str:
    if not induced.parse_ok or not induced.text.strip():
        raise PreconditionError("Cannot judge an induced rule that failed to parse")
    if not ground_truth_rule.strip():
        raise PreconditionError("Ground-truth rule text is empty")
    return (
        JUDGE_TEMPLATE
        .replace("[GAME TYPE]", game_display_name(game))
        .replace("[INSERT TRUE RULE]", ground_truth_rule.strip())
        .replace("[INSERT MODEL RULE]", induced.text.strip())
    )


def parse_induced_rule(raw: str) -> InducedRule:
    """Text after the last "Induced Rule:" marker; bold markup around the marker is dropped."""
    position = raw.rfind(RULE_MARKER)
    if position < 0:
        return InducedRule(text="", raw_response=raw, parse_ok=False)
    text = raw[position + len(RULE_MARKER):].strip()
    text = text.lstrip("*").strip()
    return InducedRule(text=text, raw_response=raw, parse_ok=True)
