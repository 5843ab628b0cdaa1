"""Prompt sections, ablation configurations, and prompt text builders."""

from __future__ import annotations

from dataclasses import dataclass, field

SECTION_ORDER = ("base", "technical", "news", "txn_stats", "reflection")
MARKERS = {
    "base": "### TRADING RULES",
    "technical": "### TECHNICAL ANALYSIS",
    "news": "### NEWS ANALYSIS",
    "txn_stats": "### ON-CHAIN STATISTICS",
    "reflection": "### REFLECTION",
}
OPTIONAL_SECTIONS = frozenset(SECTION_ORDER[1:])

ABLATIONS: dict[str, frozenset[str]] = {
    "full": OPTIONAL_SECTIONS,
    "no_reflection": OPTIONAL_SECTIONS - {"reflection"},
    "no_news": OPTIONAL_SECTIONS - {"news"},
    "no_txnstats": OPTIONAL_SECTIONS - {"txn_stats"},
    "no_technical": OPTIONAL_SECTIONS - {"technical"},
    "base": frozenset(),
}


@dataclass(frozen=True)
class AblationConfig:
    name: str
    flags: frozenset[str] = field(init=False)

    def __post_init__(self):
        if self.name not in ABLATIONS:
            raise ValueError(f"unknown ablation {self.name!r}; expected one of {', '.join(ABLATIONS)}")
        object.__setattr__(self, "flags", ABLATIONS[self.name])


@dataclass(frozen=True)
class PromptBundle:
    base: str
    technical: str | None = None
    news: str | None = None
    txn_stats: str | None = None
    reflection: str | None = None
    flags: frozenset[str] = frozenset()

    def __post_init__(self):
        for name in OPTIONAL_SECTIONS:
            if (getattr(self, name) is not None) != (name in self.flags):
                raise ValueError(f"section {name!r} presence does not match its flag")

    def sections(self) -> list[tuple[str, str]]:
        return [(name, getattr(self, name)) for name in SECTION_ORDER if getattr(self, name) is not None]

    def render(self) -> str:
        return "\n\n".join(f"{MARKERS[name]}\n{text.rstrip()}" for name, text in self.sections()) + "\n"


TRADING_SYSTEM = (
    "You are an experienced cryptocurrency trader. You make one trading decision per day "
    "from the context provided, give a concise rationale, and finish with the action line."
)
MARKET_SYSTEM = (
    "You are a market analyst. From the technical indicators provided, write a short report "
    "on the market's direction and momentum."
)
NEWS_SYSTEM = (
    "You are a news analyst for cryptocurrency markets. Identify the relevant recent events in "
    "the articles provided and assess their significance and likely market impact."
)
REFLECTION_SYSTEM = (
    "You are a trading coach. Review the recent decisions and realised returns, identify which "
    "information was most impactful and why, and give brief guidance for the next decision."
)

RETRY_INSTRUCTION = "Respond with a single number in [-1, 1] on a line starting with 'Action:'."

BASE_TEMPLATE = """\
You manage a portfolio of cash (USD) and {asset}. Each day you choose one action, a number in [-1, 1]:
- a value in (0, 1] spends that fraction of the remaining cash to buy {asset};
- a value in [-1, 0) sells that fraction of the {asset} held;
- 0 holds.
Every trade is charged a fee proportional to the traded value.

Date: {today}
Cash: {cash:.2f} USD
{asset} holdings: {holdings:.6f}
Recent {asset} open prices (USD):
{prices}

Finish your answer with a line of the form "Action: <number>"."""
