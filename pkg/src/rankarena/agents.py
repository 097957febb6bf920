"""Publisher agents: prompt construction, LLM-backed acting, scripted strategies.

Prompt wording lives in versioned template files under ``templates/`` so it
can be swapped without code changes. Rendered prompts are anonymous: they
carry ranks and "your document" markers, never competitor agent ids.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import TYPE_CHECKING, Sequence

from .corpus import Query
from .providers import ChatProvider

if TYPE_CHECKING:
    from .engine import RoundState

PROMPT_INIT = "init"
PROMPT_NOFEEDBACK = "nofeedback"
PROMPT_LISTWISE = "listwise"
PROMPT_PAIRWISE = "pairwise"
PROMPT_KINDS = (PROMPT_INIT, PROMPT_NOFEEDBACK, PROMPT_LISTWISE, PROMPT_PAIRWISE)

# how many completed rounds each feedback prompt shows
LISTWISE_WINDOW = 2
PAIRWISE_WINDOW = 3

DEFAULT_WORD_TARGET = 147
DEFAULT_WORD_MAX = 150

STRATEGY_NOOP = "noop"
STRATEGY_COPY_TOP = "copy_top"
STRATEGY_KEYWORD_STUFF = "keyword_stuff"
STRATEGY_MIMIC_WINNER_PREFIX = "mimic_winner_prefix"
STRATEGIES = (
    STRATEGY_NOOP,
    STRATEGY_COPY_TOP,
    STRATEGY_KEYWORD_STUFF,
    STRATEGY_MIMIC_WINNER_PREFIX,
)

_PROMPT_ALIASES = {
    "lsw": PROMPT_LISTWISE,
    "paw": PROMPT_PAIRWISE,
    "init": PROMPT_INIT,
    "nofeedback": PROMPT_NOFEEDBACK,
    "no-feedback": PROMPT_NOFEEDBACK,
    "listwise": PROMPT_LISTWISE,
    "pairwise": PROMPT_PAIRWISE,
}


def normalize_prompt_kind(name: str) -> str:
    kind = _PROMPT_ALIASES.get(name.strip().lower())
    if kind is None:
        raise ValueError(f"unknown prompt kind {name!r}; expected one of {sorted(set(_PROMPT_ALIASES))}")
    return kind


class PromptHistoryError(ValueError):
    """The prompt kind needs more (or less) history than the context holds."""


@dataclass(frozen=True)
class PromptContext:
    """Everything an agent sees before acting in a round."""

    query: Query
    own_agent_id: str
    history: tuple["RoundState", ...]
    prompt_kind: str
    word_target: int = DEFAULT_WORD_TARGET
    word_max: int = DEFAULT_WORD_MAX

    def __post_init__(self) -> None:
        if self.prompt_kind not in PROMPT_KINDS:
            raise ValueError(f"unknown prompt kind {self.prompt_kind!r}")
        if self.word_target > self.word_max:
            raise ValueError("word_target must not exceed word_max")
        rounds = [state.round for state in self.history]
        if rounds != sorted(rounds):
            raise ValueError("history must be ordered by round")

    @property
    def next_round(self) -> int:
        return self.history[-1].round + 1 if self.history else 1


@dataclass(frozen=True)
class AgentAction:
    """One agent's submitted document for a round."""

    agent_id: str
    round: int
    text: str
    truncated: bool = False
    carried: bool = False  # previous document retained (empty/failed completion)

    def __post_init__(self) -> None:
        if self.round < 1:
            raise ValueError("round must be >= 1")
        if not self.text.strip():
            raise ValueError(f"agent {self.agent_id!r} produced empty text")


@lru_cache(maxsize=None)
def _template(name: str) -> str:
    data = resources.files("rankarena.templates").joinpath(f"{name}.txt").read_text("utf-8")
    return data.rstrip("\n")


def _fill(template: str, mapping: dict[str, str]) -> str:
    # plain replacement: document texts may legally contain braces
    out = template
    for key, value in mapping.items():
        out = out.replace("{" + key + "}", value)
    return out


def current_document(ctx: PromptContext) -> str:
    if not ctx.history:
        raise PromptHistoryError(
            f"agent {ctx.own_agent_id!r} has no history to take a current document from"
        )
    return ctx.history[-1].documents[ctx.own_agent_id].text


def render_init_prompt(query: Query, word_target: int = DEFAULT_WORD_TARGET, word_max: int = DEFAULT_WORD_MAX) -> str:
    return _fill(
        _template("init"),
        {"query": query.text, "word_target": str(word_target), "word_max": str(word_max)},
    )


def render_nofeedback_prompt(
    query: Query,
    document: str,
    word_target: int = DEFAULT_WORD_TARGET,
    word_max: int = DEFAULT_WORD_MAX,
) -> str:
    return _fill(
        _template("nofeedback"),
        {
            "query": query.text,
            "document": document,
            "word_target": str(word_target),
            "word_max": str(word_max),
        },
    )


def _ranked_list_block(state: "RoundState", own_agent_id: str) -> str:
    lines = [f" - Ranked List (Round {state.round}):"]
    for position, entry in enumerate(state.ranking.entries, start=1):
        marker = " (your document)" if entry.agent_id == own_agent_id else ""
        lines.append(f"   Rank {position}{marker}: {state.documents[entry.agent_id].text}")
    return "\n".join(lines)


def _document_pair_block(state: "RoundState", own_agent_id: str, rival_id: str) -> str:
    k = len(state.ranking.entries)
    own_rank = state.ranking.rank_of(own_agent_id)
    rival_rank = state.ranking.rank_of(rival_id)
    return (
        f" - Document Pair (Round {state.round}):\n"
        f"   Your document (Rank {own_rank} of {k}): {state.documents[own_agent_id].text}\n"
        f"   Competitor document (Rank {rival_rank} of {k}): {state.documents[rival_id].text}"
    )


def _pick_rival(state: "RoundState", own_agent_id: str) -> str:
    # the top-ranked competitor; the runner-up when we hold rank 1 ourselves
    for entry in state.ranking.entries:
        if entry.agent_id != own_agent_id:
            return entry.agent_id
    raise PromptHistoryError("pairwise prompt needs at least one competitor in the ranking")


def build_prompt(ctx: PromptContext) -> str:
    """Render the prompt an agent sees for its next move.

    Feedback prompts show all the rounds they can (up to their window) and
    state how many; early rounds therefore render fewer rounds rather than
    failing, but at least one completed round is required.
    """
    if ctx.prompt_kind == PROMPT_INIT:
        if ctx.history:
            raise PromptHistoryError("init prompt takes no history")
        return render_init_prompt(ctx.query, ctx.word_target, ctx.word_max)

    if not ctx.history:
        raise PromptHistoryError(
            f"{ctx.prompt_kind} prompt needs at least 1 completed round, have 0"
        )
    document = current_document(ctx)

    if ctx.prompt_kind == PROMPT_NOFEEDBACK:
        return render_nofeedback_prompt(ctx.query, document, ctx.word_target, ctx.word_max)

    if ctx.prompt_kind == PROMPT_LISTWISE:
        window = ctx.history[-LISTWISE_WINDOW:]
        blocks = [_ranked_list_block(s, ctx.own_agent_id) for s in window]
        template_name = "listwise"
    else:  # pairwise
        window = ctx.history[-PAIRWISE_WINDOW:]
        rival = _pick_rival(window[-1], ctx.own_agent_id)
        blocks = [
            _document_pair_block(state, ctx.own_agent_id, rival)
            for state in window
            if rival in state.documents and ctx.own_agent_id in state.documents
        ]
        template_name = "pairwise"

    return _fill(
        _template(template_name),
        {
            "query": ctx.query.text,
            "document": document,
            "history": "\n\n".join(blocks),
            "round_count": str(len(blocks)),
            "word_target": str(ctx.word_target),
            "word_max": str(ctx.word_max),
        },
    )


_FENCE_RE = re.compile(r"^```[a-zA-Z]*\s*$")
_ECHO_RE = re.compile(r"^\s*(edited document|the document|document)\s*:\s*", re.IGNORECASE)
_QUOTE_PAIRS = (('"', '"'), ("'", "'"), ("“", "”"), ("‘", "’"))


def clean_completion(raw: str) -> str:
    """Strip wrapping quotes, markdown fences, and prompt-echo labels."""
    text = raw.strip()
    lines = text.splitlines()
    if lines and _FENCE_RE.match(lines[0]):
        lines = lines[1:]
    if lines and _FENCE_RE.match(lines[-1]):
        lines = lines[:-1]
    text = "\n".join(lines).strip()
    text = _ECHO_RE.sub("", text, count=1).strip()
    for opener, closer in _QUOTE_PAIRS:
        if len(text) >= 2 and text.startswith(opener) and text.endswith(closer):
            text = text[1:-1].strip()
            break
    return text


def enforce_word_limit(text: str, word_max: int) -> tuple[str, bool]:
    """Cap the text at word_max whitespace-words; truncation joins with spaces."""
    words = text.split()
    if len(words) <= word_max:
        return text, False
    return " ".join(words[:word_max]), True


def llm_agent_act(
    ctx: PromptContext,
    chat: ChatProvider,
    temperature: float = 0.0,
    sample_index: int = 0,
) -> AgentAction:
    """Build the prompt, query the chat provider, and post-process the reply.

    Provider failures propagate to the caller (the engine treats them as
    round-level errors). An empty completion keeps the previous document and
    is flagged as carried.
    """
    prompt = build_prompt(ctx)
    raw = chat.complete(prompt, temperature=temperature, sample_index=sample_index)
    cleaned = clean_completion(raw)
    if not cleaned:
        return AgentAction(
            agent_id=ctx.own_agent_id,
            round=ctx.next_round,
            text=current_document(ctx),
            carried=True,
        )
    text, truncated = enforce_word_limit(cleaned, ctx.word_max)
    return AgentAction(agent_id=ctx.own_agent_id, round=ctx.next_round, text=text, truncated=truncated)


def scripted_agent_act(ctx: PromptContext, strategy: str) -> AgentAction:
    """Deterministic strategies used as oracles and offline opponents."""
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    own_text = current_document(ctx)
    last = ctx.history[-1]

    if strategy == STRATEGY_NOOP:
        text = own_text
    elif strategy == STRATEGY_COPY_TOP:
        text = last.documents[last.ranking.top.agent_id].text
    elif strategy == STRATEGY_KEYWORD_STUFF:
        words = own_text.split()
        query_words = ctx.query.text.split()
        i = 0
        while len(words) < ctx.word_max and query_words:
            words.append(query_words[i % len(query_words)])
            i += 1
        text = " ".join(words)
    else:  # mimic_winner_prefix
        winner_words = last.documents[last.ranking.top.agent_id].text.split()
        own_words = own_text.split()
        text = " ".join(winner_words[: len(winner_words) // 2] + own_words[len(own_words) // 2 :])

    text, truncated = enforce_word_limit(text, ctx.word_max)
    return AgentAction(agent_id=ctx.own_agent_id, round=ctx.next_round, text=text, truncated=truncated)
