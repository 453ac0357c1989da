"""Sentence-transformation kernels.

A kernel maps one sentence state to a draw from a distribution over
next states.  Four kinds are provided:

* :class:`FiniteKernel` -- synthetic kernel over an explicit state list,
  parameterized by a logit matrix so the same object runs under both
  greedy and sampling decoding;
* :class:`ScriptedKernel` -- deterministic lookup table, for replaying
  known trajectories and for fixtures;
* :class:`LLMKernel` -- prompt + chat-completion endpoint;
* round-trip composition of two directional kernels via
  :func:`compose_round_trip` (e.g. EN -> bridge -> EN), which records
  the intermediate string of every step.

Prompt schedules make the per-iteration template a function of the
iteration index, which turns a fixed kernel into a time-inhomogeneous
one; the index of the template used is recorded on every step so the
augmented state (sentence, template index) can be reconstructed.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import CompositionError, InvalidInputError, TemplateError
from .markov_analysis import TransitionMatrix
from .textunit import Sentence, canonicalize, segment


@dataclass(frozen=True)
class DecodingConfig:
    """Greedy or sampling decoding plus its parameters.

    Greedy mode records temperature/top_p but never uses them.
    """

    mode: str
    temperature: float = 0.7
    top_p: float = 0.9
    rng_seed: int | None = None

    def __post_init__(self):
        if self.mode not in ("greedy", "sampling"):
            raise InvalidInputError(f"unknown decoding mode: {self.mode!r}")
        if not self.temperature > 0:
            raise InvalidInputError("temperature must be positive")
        if not 0 < self.top_p <= 1:
            raise InvalidInputError("top_p must lie in (0, 1]")

    @property
    def label(self) -> str:
        if self.mode == "greedy":
            return "greedy"
        return f"sampling(t={self.temperature:g},p={self.top_p:g})"

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "temperature": self.temperature,
            "top_p": self.top_p,
            "rng_seed": self.rng_seed,
        }


GREEDY = DecodingConfig(mode="greedy")


@dataclass(frozen=True)
class PromptTemplate:
    """Instruction text with a ``{content}`` slot (and optional ``{target_lang}``)."""

    template_id: str
    body: str

    def __post_init__(self):
        if self.body.count("{content}") != 1:
            raise TemplateError(
                f"template {self.template_id!r} must contain {{content}} exactly once"
            )

    @property
    def wants_target_lang(self) -> bool:
        return "{target_lang}" in self.body


BUILTIN_TEMPLATE_IDS = (
    "rephrase_main",
    "rephrase_short",
    "translate_en_to_x",
    "translate_x_to_en",
)


def load_template(template_id: str) -> PromptTemplate:
    """Load one of the built-in prompt template files, byte for byte."""
    if template_id not in BUILTIN_TEMPLATE_IDS:
        raise TemplateError(f"unknown template id: {template_id!r}")
    body = (resources.files("chainlab") / "prompts" / f"{template_id}.txt").read_text("utf-8")
    return PromptTemplate(template_id=template_id, body=body)


def render_prompt(template: PromptTemplate, content, target_lang: str | None = None) -> str:
    """Substitute placeholders; performs no other mutation of the text."""
    if template.wants_target_lang and target_lang is None:
        raise TemplateError(f"template {template.template_id!r} needs the placeholder argument: target_lang")
    if not template.wants_target_lang and target_lang is not None:
        raise TemplateError(f"template {template.template_id!r} takes no placeholder argument: target_lang")
    text = content.raw if isinstance(content, Sentence) else str(content)
    out = template.body.replace("{content}", text)
    if target_lang is not None:
        out = out.replace("{target_lang}", target_lang)
    return out


@dataclass(frozen=True)
class PromptSchedule:
    """Fixed template, or templates alternating with the iteration index."""

    templates: tuple[PromptTemplate, ...]
    policy: str = "fixed"

    def __post_init__(self):
        if not self.templates:
            raise InvalidInputError("a prompt schedule needs at least one template")
        if self.policy not in ("fixed", "alternate"):
            raise InvalidInputError(f"unknown schedule policy: {self.policy!r}")
        if self.policy == "fixed" and len(self.templates) != 1:
            raise InvalidInputError("fixed schedules take exactly one template")

    def template_index(self, t: int) -> int:
        if t < 0:
            raise InvalidInputError("iteration index must be non-negative")
        if self.policy == "fixed":
            return 0
        return t % len(self.templates)


@dataclass(frozen=True)
class KernelStep:
    """One draw from a kernel, with whatever metadata the kind can supply."""

    output: Sentence
    chosen_index: int | None = None
    step_probability: float | None = None
    prompt_index: int = 0
    intermediate: str | None = None
    truncated: bool = False


def apply_decoding(logit_row, config: DecodingConfig) -> np.ndarray:
    """Turn one row of logits into a next-state probability vector.

    Sampling mode: softmax at the configured temperature, then nucleus
    truncation -- keep the smallest prefix of probability-sorted entries
    whose cumulative mass reaches ``top_p`` (ties broken toward lower
    state indices), zero the rest, renormalize.  Greedy mode: point mass
    on the argmax (ties toward the lower index).
    """
    row = np.asarray(logit_row, dtype=float)
    if row.ndim != 1 or row.size == 0:
        raise InvalidInputError("logit row must be a non-empty vector")
    if not np.all(np.isfinite(row)):
        raise InvalidInputError("logits must be finite")
    m = row.size
    if config.mode == "greedy":
        out = np.zeros(m)
        out[int(np.argmax(row))] = 1.0
        return out
    z = row / config.temperature
    z = z - z.max()
    p = np.exp(z)
    p = p / p.sum()
    if config.top_p < 1.0:
        order = np.argsort(-p, kind="stable")
        csum = np.cumsum(p[order])
        keep = order[: int(np.searchsorted(csum, config.top_p - 1e-12)) + 1]
        trimmed = np.zeros(m)
        trimmed[keep] = p[keep]
        p = trimmed / trimmed.sum()
    return p


class Kernel:
    """Base interface: one stochastic step on a sentence state."""

    source_lang: str = "en"
    target_lang: str = "en"
    label: str = "kernel"

    def step(self, state: Sentence, rng: np.random.Generator, t: int = 0,
             decoding: DecodingConfig | None = None,
             template: PromptTemplate | None = None) -> KernelStep:
        raise NotImplementedError

    def deterministic(self, decoding: DecodingConfig | None) -> bool:
        return False

    def with_chain_seed(self, seed: int) -> "Kernel":
        """Copy bound to a per-chain external seed; default is a no-op."""
        return self

    def describe(self) -> dict:
        return {"kind": type(self).__name__, "label": self.label,
                "source_lang": self.source_lang, "target_lang": self.target_lang}


class FiniteKernel(Kernel):
    """Synthetic kernel over an explicit finite state space.

    ``logits[i, j]`` scores the transition from input state ``i`` to
    output state ``j``.  Output states default to the input states
    (square, within-language case); a translation-direction kernel
    passes a distinct output list.
    """

    def __init__(self, states, logits, out_states=None, source_lang="en",
                 target_lang="en", label="finite"):
        self.states = [str(s) for s in states]
        self.out_states = [str(s) for s in out_states] if out_states is not None else list(self.states)
        logits = np.asarray(logits, dtype=float)
        if logits.shape != (len(self.states), len(self.out_states)):
            raise InvalidInputError(
                f"logit matrix shape {logits.shape} does not match "
                f"{len(self.states)} x {len(self.out_states)} states"
            )
        if len(self.states) < 1:
            raise InvalidInputError("a finite kernel needs at least one state")
        if not np.all(np.isfinite(logits)):
            raise InvalidInputError("logits must be finite")
        self.logits = logits
        self.source_lang = source_lang
        self.target_lang = target_lang
        self.label = label
        self._index = {canonicalize(s): i for i, s in enumerate(self.states)}
        if len(self._index) != len(self.states):
            raise InvalidInputError("state labels collide after canonicalization")
        self._out_sentences = [Sentence.from_raw(s) for s in self.out_states]
        self._decoded: dict[DecodingConfig, np.ndarray] = {}

    @property
    def size(self) -> int:
        return len(self.states)

    def state_index(self, state: Sentence) -> int:
        idx = self._index.get(state.key)
        if idx is None:
            raise InvalidInputError(f"state {state.key!r} is not in this kernel's state space")
        return idx

    def decoded_matrix(self, config: DecodingConfig) -> np.ndarray:
        """Transition probabilities row by row under ``config`` (cached)."""
        cached = self._decoded.get(config)
        if cached is None:
            cached = np.stack([apply_decoding(row, config) for row in self.logits])
            cached.setflags(write=False)
            self._decoded[config] = cached
        return cached

    def transition_matrix(self, config: DecodingConfig) -> TransitionMatrix:
        row_labels = tuple(canonicalize(s) for s in self.states)
        col_labels = tuple(canonicalize(s) for s in self.out_states)
        return TransitionMatrix(row_labels, col_labels, self.decoded_matrix(config))

    def step(self, state, rng, t=0, decoding=None, template=None):
        if decoding is None:
            raise InvalidInputError("a finite kernel needs a decoding config")
        return sample_step(self, self.state_index(state), decoding, rng)

    def deterministic(self, decoding):
        return decoding is not None and decoding.mode == "greedy"

    def describe(self):
        d = super().describe()
        d["states"] = len(self.states)
        return d


def sample_step(kernel: FiniteKernel, state_index: int, config: DecodingConfig,
                rng: np.random.Generator) -> KernelStep:
    """Draw the next state index for one finite-kernel transition."""
    if not 0 <= state_index < kernel.size:
        raise InvalidInputError(f"state index {state_index} out of range [0, {kernel.size})")
    probs = kernel.decoded_matrix(config)[state_index]
    if config.mode == "greedy":
        j = int(np.argmax(probs))
    else:
        j = int(rng.choice(probs.size, p=probs))
    return KernelStep(
        output=kernel._out_sentences[j],
        chosen_index=j,
        step_probability=float(probs[j]),
    )


class ScriptedKernel(Kernel):
    """Deterministic kernel defined by a canonical-key lookup table.

    States missing from the script pass through unchanged ("identity"
    default) or raise ("error" default).
    """

    def __init__(self, script, default="identity", source_lang="en",
                 target_lang="en", label="scripted"):
        if default not in ("identity", "error"):
            raise InvalidInputError(f"unknown scripted default: {default!r}")
        self.script = {canonicalize(k): v for k, v in dict(script).items()}
        self.default = default
        self.source_lang = source_lang
        self.target_lang = target_lang
        self.label = label

    @classmethod
    def identity(cls, **kwargs) -> "ScriptedKernel":
        return cls({}, default="identity", **kwargs)

    @classmethod
    def cycle(cls, sentences, **kwargs) -> "ScriptedKernel":
        """Kernel that walks the given sentences in a cycle."""
        sentences = list(sentences)
        script = {s: sentences[(i + 1) % len(sentences)] for i, s in enumerate(sentences)}
        return cls(script, **kwargs)

    def step(self, state, rng, t=0, decoding=None, template=None):
        out_raw = self.script.get(state.key)
        if out_raw is None:
            if self.default == "error":
                raise InvalidInputError(f"scripted kernel has no rule for {state.key!r}")
            out_raw = state.raw
        return KernelStep(output=Sentence.from_raw(out_raw))

    def deterministic(self, decoding):
        return True

    def describe(self):
        d = super().describe()
        d["rules"] = len(self.script)
        return d


class RoundTripKernel(Kernel):
    """Composition of a forward and a backward kernel; one step runs both.

    The intermediate (bridge-language) string is kept on every step.
    """

    def __init__(self, forward: Kernel, backward: Kernel):
        self.forward = forward
        self.backward = backward
        self.source_lang = forward.source_lang
        self.target_lang = backward.target_lang
        self.label = f"{forward.label}*{backward.label}"

    def step(self, state, rng, t=0, decoding=None, template=None):
        mid = self.forward.step(state, rng, t=t, decoding=decoding)
        out = self.backward.step(mid.output, rng, t=t, decoding=decoding)
        prob = None
        if mid.step_probability is not None and out.step_probability is not None:
            prob = mid.step_probability * out.step_probability
        return KernelStep(
            output=out.output,
            chosen_index=out.chosen_index,
            step_probability=prob,
            intermediate=mid.output.raw,
            truncated=mid.truncated or out.truncated,
        )

    def deterministic(self, decoding):
        return self.forward.deterministic(decoding) and self.backward.deterministic(decoding)

    def with_chain_seed(self, seed):
        fwd = self.forward.with_chain_seed(seed)
        bwd = self.backward.with_chain_seed(seed)
        if fwd is self.forward and bwd is self.backward:
            return self
        return RoundTripKernel(fwd, bwd)

    def describe(self):
        d = super().describe()
        d["forward"] = self.forward.describe()
        d["backward"] = self.backward.describe()
        return d


def compose_round_trip(forward: Kernel, backward: Kernel) -> RoundTripKernel:
    """Chain two directional kernels into a single one-step operator."""
    if forward.target_lang != backward.source_lang:
        raise CompositionError(
            f"cannot compose: forward kernel ends in {forward.target_lang!r} "
            f"but backward kernel starts in {backward.source_lang!r}"
        )
    return RoundTripKernel(forward, backward)


def scheduled_step(schedule: PromptSchedule, base_kernel, state: Sentence, t: int,
                   config: DecodingConfig | None, rng: np.random.Generator) -> KernelStep:
    """Run one step with the template the schedule selects for iteration ``t``.

    ``base_kernel`` is either a single kernel, which receives the
    selected template, or a sequence aligned with the schedule's
    templates (one kernel per template).
    """
    k = schedule.template_index(t)
    template = schedule.templates[k]
    if isinstance(base_kernel, (list, tuple)):
        if len(base_kernel) != len(schedule.templates):
            raise InvalidInputError(
                f"{len(base_kernel)} kernels cannot serve {len(schedule.templates)} templates"
            )
        step = base_kernel[k].step(state, rng, t=t, decoding=config)
    else:
        step = base_kernel.step(state, rng, t=t, decoding=config, template=template)
    return dataclasses.replace(step, prompt_index=k)


class ScheduledKernel(Kernel):
    """Kernel whose active prompt follows a :class:`PromptSchedule`."""

    def __init__(self, schedule: PromptSchedule, base):
        self.schedule = schedule
        self.base = tuple(base) if isinstance(base, (list, tuple)) else base
        first = self.base[0] if isinstance(self.base, tuple) else self.base
        self.source_lang = first.source_lang
        self.target_lang = first.target_lang
        self.label = f"scheduled[{schedule.policy}]"

    def step(self, state, rng, t=0, decoding=None, template=None):
        return scheduled_step(self.schedule, self.base, state, t, decoding, rng)

    def deterministic(self, decoding):
        kernels = self.base if isinstance(self.base, tuple) else (self.base,)
        return all(k.deterministic(decoding) for k in kernels)

    def with_chain_seed(self, seed):
        if isinstance(self.base, tuple):
            return ScheduledKernel(self.schedule, [k.with_chain_seed(seed) for k in self.base])
        return ScheduledKernel(self.schedule, self.base.with_chain_seed(seed))

    def describe(self):
        d = super().describe()
        d["policy"] = self.schedule.policy
        d["templates"] = [tpl.template_id for tpl in self.schedule.templates]
        return d


class LLMKernel(Kernel):
    """Prompted chat-completion endpoint as a transformation kernel.

    Multi-sentence replies are reduced according to ``policy``:

    * ``"first"`` -- keep the first sentence and mark the step truncated;
    * ``("retry", k)`` -- re-ask up to ``k`` extra times, then fall back
      to ``"first"``;
    * ``"accept-whole"`` -- keep the entire reply as one state
      (paragraph mode).

    Greedy decoding goes on the wire as temperature 0 / top_p 1, the
    closest portable approximation of argmax decoding.
    """

    def __init__(self, endpoint, template: PromptTemplate, policy="first",
                 target_lang_name: str | None = None, max_output_tokens: int = 256,
                 source_lang="en", target_lang="en", label=None, client=None,
                 chain_seed: int | None = None, max_in_flight: int = 4,
                 requests_per_minute: float | None = None):
        if not (policy in ("first", "accept-whole")
                or (isinstance(policy, tuple) and len(policy) == 2 and policy[0] == "retry")):
            raise InvalidInputError(f"unknown single-sentence policy: {policy!r}")
        from . import llm_client

        self.endpoint = endpoint
        self.template = template
        self.policy = policy
        self.target_lang_name = target_lang_name
        self.max_output_tokens = max_output_tokens
        self.source_lang = source_lang
        self.target_lang = target_lang
        self.label = label if label is not None else f"llm:{endpoint.model_name}"
        self.chain_seed = chain_seed
        # one shared client per kernel so the in-flight semaphore and rate
        # limiter actually cap concurrent chains
        self._client = client if client is not None else llm_client.ChatClient(
            endpoint, max_in_flight=max_in_flight,
            requests_per_minute=requests_per_minute,
        )

    def with_chain_seed(self, seed):
        return LLMKernel(
            endpoint=self.endpoint, template=self.template, policy=self.policy,
            target_lang_name=self.target_lang_name, max_output_tokens=self.max_output_tokens,
            source_lang=self.source_lang, target_lang=self.target_lang, label=self.label,
            client=self._client, chain_seed=seed,
        )

    def _complete(self, prompt: str, decoding: DecodingConfig) -> str:
        from . import llm_client

        if decoding.mode == "greedy":
            temperature, top_p = 0.0, 1.0
        else:
            temperature, top_p = decoding.temperature, decoding.top_p
        seed = self.chain_seed if self.chain_seed is not None else decoding.rng_seed
        request = llm_client.CompletionRequest(
            prompt=prompt, temperature=temperature, top_p=top_p,
            seed=seed, max_output_tokens=self.max_output_tokens,
        )
        return self._client.complete(request).text

    def step(self, state, rng, t=0, decoding=None, template=None):
        if decoding is None:
            raise InvalidInputError("an LLM kernel needs a decoding config")
        tpl = template if template is not None else self.template
        prompt = render_prompt(tpl, state, self.target_lang_name if tpl.wants_target_lang else None)
        text = self._complete(prompt, decoding)
        if self.policy == "accept-whole":
            return KernelStep(output=Sentence.from_raw(text))
        retries = self.policy[1] if isinstance(self.policy, tuple) else 0
        sentences = segment(text)
        attempts = 0
        while len(sentences) > 1 and attempts < retries:
            attempts += 1
            text = self._complete(prompt, decoding)
            sentences = segment(text)
        return KernelStep(output=sentences[0], truncated=len(sentences) > 1)

    def describe(self):
        d = super().describe()
        d["model"] = self.endpoint.model_name
        d["template"] = self.template.template_id
        d["policy"] = list(self.policy) if isinstance(self.policy, tuple) else self.policy
        return d


def random_logits_kernel(m: int, seed: int, noise_scale: float = 1.0,
                         attraction_scale: float = 2.5, label: str | None = None) -> FiniteKernel:
    """Seeded random synthetic kernel with attractor structure.

    Logits are iid noise plus a per-destination "attraction" offset, so
    a few states are globally popular.  Cold decoding then collapses
    onto short cycles through the popular states while hot decoding
    keeps exploring -- the regime contrast the decoding studies measure.
    """
    if m < 1:
        raise InvalidInputError("state count must be at least 1")
    rng = np.random.default_rng(seed)
    logits = rng.normal(0.0, noise_scale, (m, m)) + rng.normal(0.0, attraction_scale, m)[None, :]
    states = [f"s{i:04d}" for i in range(m)]
    return FiniteKernel(states, logits, label=label or f"random-logits(m={m},seed={seed})")
