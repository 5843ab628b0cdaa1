from .backend import (
    Backend,
    BackendConfig,
    BackendError,
    ChatBackend,
    MockBackend,
    ModelExchange,
    RateLimiter,
    prompt_sha256,
    render_action_response,
)
from .pipeline import (
    ActionParseError,
    AgentStrategy,
    AnalystReport,
    NewsBudget,
    ReflectionEntry,
    agent_strategy,
    build_market_report,
    build_news_report,
    build_trading_prompt,
    parse_action,
    run_reflection,
)
from .prompts import ABLATIONS, MARKERS, AblationConfig, PromptBundle
