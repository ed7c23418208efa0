"""Prompt templates and structured-output schemas for the text-completion policies."""

from __future__ import annotations

import json
import string
from dataclasses import dataclass
from typing import Any, Iterable

from .base import BuyerContext, SellerContext, TrendSummary


@dataclass(frozen=True)
class PromptBundle:
    system_prompt: str
    user_prompt: str
    expected_schema: str


SCHEMAS: dict[str, dict[str, Any]] = {
    "metadata": {
        "type": "object",
        "required": [
            "data_name",
            "description",
            "columns",
            "tags",
            "data_price",
            "update_frequency",
        ],
        "properties": {
            "data_name": {"type": "string", "minLength": 1},
            "description": {"type": "string"},
            "columns": {
                "anyOf": [
                    {"type": "string", "minLength": 1},
                    {"type": "array", "items": {"type": "string"}, "minItems": 1},
                ]
            },
            "tags": {
                "anyOf": [{"type": "string"}, {"type": "array", "items": {"type": "string"}}]
            },
            "data_price": {"type": "number"},
            "update_frequency": {"enum": ["static", "low", "medium", "high"]},
        },
    },
    "goal": {
        "type": "object",
        "required": ["analysis_purpose"],
        "properties": {"analysis_purpose": {"type": "string", "minLength": 1}},
    },
    "seller_action": {
        "type": "object",
        "required": ["action"],
        "properties": {
            "action": {
                "enum": ["update_data", "change_price", "provide_data", "do_nothing", "exit_market"]
            },
            "dataset_id": {"type": "string"},
            "new_price": {"type": "number"},
            "reasoning": {"type": "string"},
        },
    },
    "buyer_action": {
        "type": "object",
        "required": ["action"],
        "properties": {
            "action": {
                "enum": ["plan", "search", "buy", "analyze", "do_nothing", "exit_market"]
            },
            "plan": {"type": "string"},
            "query": {"type": "string"},
            "dataset_id": {"type": "string"},
            "reasoning": {"type": "string"},
        },
    },
}

FORMAT_HINTS = {
    "metadata": (
        '{"data_name": str, "description": str, "columns": [str, ...], "tags": [str], '
        '"data_price": number, "update_frequency": "static" | "low" | "medium" | "high"}'
    ),
    "goal": '{"analysis_purpose": str}',
    "seller_action": (
        '{"action": "update_data" | "change_price" | "provide_data" | "do_nothing" | '
        '"exit_market", "dataset_id": str (update_data, change_price), '
        '"new_price": number (change_price), "reasoning": str}'
    ),
    "buyer_action": (
        '{"action": "plan" | "search" | "buy" | "analyze" | "do_nothing" | "exit_market", '
        '"plan": str (plan), "query": str (search), "dataset_id": str (buy), "reasoning": str}'
    ),
}


def output_instructions(schema_id: str) -> str:
    return (
        "\n\n# Output format\n"
        "Reply with a single JSON object and nothing else, shaped as:\n"
        + FORMAT_HINTS[schema_id]
    )


DATA_GENERATOR_SYSTEM = """\
You are a data creator, who creates new data for the data market. Your task is to create new data which is valuable and realistic for the data market.

# Instructions
- Field: {field}
- Important Constraints: The data name must be unique and not duplicate with the existing data names in the list below.
- Think about the content of the data as much as possible and create the metadata.

# Metadata content
- data_name: name of the data
- description: description of the data content, which should be concise, clear and specific.
- columns: column names of the data (e.g. 'id,date,value')
- tags: {field}
- data_price: price of the data
- update_frequency: update frequency of the data (high, medium, low, static)"""

DATA_GENERATOR_USER = """\
# Existing data names
{existing_names}"""

GOAL_WITH_TRENDS_SYSTEM = """\
You are a data analyst for a company, who are going to participate in the data market.
Your goal is to create a purpose of your analysis considering the current market trend.
The flow of your task is as follows:
1. Plan your strategy, follow the current market trend or focus on another area  by changing the perspective.
2. Based on your strategy, create a specific and executable analysis purpose.

# Current Market Trends (Top {n_trends}):
{trends_str}

# Your Field:
{field}

# Note:
- If there is no trend related to the field, you should consider the trend and create an analysis purpose by yourself.
- Avoid creating an analysis purpose that is not natural.
- Avoid creating an analysis purpose by forcibly combining loosely related/unrelated fields.

# Example 1: Field has trend related data
- Field: marketing
- Trend: 1. "Social media mention data for specific products", 2. "Stock price data of Nikkei 225", 3. "E-commerce site review data", 4. "COVID-19 vaccination status data", ...
- Analysis Purpose: Analyze the correlation between the sentiment of mentions on social media and the star rating of reviews, and propose a more effective marketing strategy.

# Example 2: Field has no trend related data
- Field: sports
- Trend: 1. "Social media mention data for specific products", 2. "Stock price data of Nikkei 225", 3. "E-commerce site review data", 4. "COVID-19 vaccination status data", ...
- Analysis Purpose: Analyze the relationship between the formation of players and the win/loss ratio, and propose a more effective formation.

# NG Example: Purpose is not natural because of forcibly combining loosely related/unrelated fields.
- Analysis Purpose: Use data related to cybersecurity to analyze the correlation between environmental data such as PM2.5 and CO2 concentration and the rate of cybersecurity attacks, and reveal the impact of environmental factors on the vulnerability of cybersecurity in a specific region. This will contribute to the development of a cybersecurity defense strategy under specific environmental conditions."""

GOAL_WITHOUT_TRENDS_SYSTEM = """\
You are a data analyst for a company, who are going to participate in the data market.
Based on the given field, create a specific and executable analysis purpose.

# Your Field:
{field}

# Note:
- The analysis purpose should be concise and specific.

# Example:
- Field: medical
- Analysis Purpose: Analyze the correlation between the COVID-19 vaccination status and the number of new infections, and predict the future spread of infection.

- Field: finance
- Analysis Purpose: Analyze the data of the Nikkei 225 stock price for the past 10 years, and build a model to predict the stock price movement for the next quarter."""

GOAL_USER = "Create the analysis purpose for the field: {field}"

SELLER_SYSTEM = """\
You are a data seller agent aiming to maximize profits by selling data in a data marketplace. Your goal is to strategically manage the data you hold and maximize revenue through pricing and data updates. Carefully analyze market conditions and your sales performance, and then choose the most reasonable next move.

To achieve this goal, you will repeatedly use the following five actions:

# Available actions
- `update_data`: Update dynamic data by adding new data or correcting existing data to increase its value.
- `change_price`: Lower the price of data that isn't selling well, or consider raising the price of high-demand data.
- `provide_data': Create and provide new data to the market. The field of the new data will be based on the tags of the data you currently own. This can expand your product line and create new revenue streams.
- `do_nothing': Observe market conditions and maintain the current data and prices. This is a wise option to wait for opportunities without incurring costs.
- `exit_market': If your data isn't selling at all and you can't foresee future profits, you will withdraw from the market to minimize losses.

# Notes
- Use `do_nothing' unless there is a specific reason to do otherwise."""

SELLER_USER = """\
# Current step
{step}

# Your revenue
{revenue}

# Your data
{listings_str}

# Your sales history
{sales_str}

# Your action history
{action_history_str}"""

BUYER_SYSTEM = """\
You are a data buyer agent in a data marketplace.
Your goal is to achieve the given analysis purpose.

To achieve this goal, you will repeatedly use the following six actions:

# Available actions
- `plan': Plan the next actions based on the current purpose and analysis results, or refine the purpose to make it more specific.
- `search': Search the marketplace for datasets that match the current purpose.
- `buy': Purchase relevant data from the marketplace.
- `analyze': Analyze the datasets you currently own to gain insights.
- `do_nothing': Intentionally take no action and maintain the current state. Use this when it is appropriate to wait for market changes or when no immediate action is necessary.
- `exit_market': Exit the marketplace and end the simulation when you have fully achieved your purpose, or when you determine that achieving the purpose is impossible due to budget or data constraints.

# Guidelines for actions
1. Begin by using `plan' to determine the next actions based on the current purpose and any analysis results, or to further specify the purpose.
2. Based on the plan,
   - Use `search' to find datasets that match the purpose, or
   - Use `buy' to acquire necessary data, or
   - Use `analyze' to extract insights from datasets you already own.
3. If there is no suitable data to purchase or if further analysis would yield no new insights, consider using `do_nothing' to wait for changes in market conditions.
4. Update or refine your plan, or propose new hypotheses, using `plan' as new insights emerge.
5. Repeat this cycle until the final purpose is achieved or proven unattainable.
6. Always consider your budget and the datasets you currently own to ensure each action is optimal.
7. When you have achieved the final purpose or conclude that it cannot be achieved, call `exit_market' to end the simulation.

# Notes
- Even when dealing with the same data, there can be different versions. A version change means the data has been updated or corrected.
- If necessary, you should buy the same data with different versions actively."""

SUBSCRIPTION_NOTE = """
- When a search result matches your purpose and has a high or medium update_frequency, include periodic re-purchases of its newer versions in your plan, like a regular subscription."""

BUYER_USER = """\
# Your final purpose
{purpose}

# Your current state
- Budget: {budget}
- Owned data list: {purchased_data_str}

# Your action history
{action_history_str}

# Last search results (Top candidates from the market DB)
{search_results_json}"""


def placeholders(template: str) -> set[str]:
    return {name for _, name, _, _ in string.Formatter().parse(template) if name}


def _render(template: str, **values: Any) -> str:
    missing = placeholders(template) - set(values)
    if missing:
        raise KeyError(f"unresolved placeholders: {sorted(missing)}")
    return template.format(**values)


def trends_str(trends: TrendSummary) -> str:
    return ", ".join(
        f'{i}. "{e.data_name}" ({e.field}, {e.count} transactions)'
        for i, e in enumerate(trends.entries, 1)
    )


def _history_str(history: Iterable[tuple[int, dict[str, Any]]]) -> str:
    lines = [f"- step {step}: {json.dumps(payload, sort_keys=True)}" for step, payload in history]
    return "\n".join(lines) if lines else "(none)"


def data_generator_prompt(field: str, existing_names: Iterable[str]) -> PromptBundle:
    names = sorted(existing_names)
    system = _render(DATA_GENERATOR_SYSTEM, field=field)
    user = _render(DATA_GENERATOR_USER, existing_names="\n".join(f"- {n}" for n in names) or "(none)")
    return PromptBundle(system + output_instructions("metadata"), user, "metadata")


def goal_prompt(field: str, trends: TrendSummary | None) -> PromptBundle:
    if trends:
        system = _render(
            GOAL_WITH_TRENDS_SYSTEM,
            n_trends=len(trends),
            trends_str=trends_str(trends),
            field=field,
        )
    else:
        system = _render(GOAL_WITHOUT_TRENDS_SYSTEM, field=field)
    return PromptBundle(system + output_instructions("goal"), _render(GOAL_USER, field=field), "goal")


def seller_prompt(ctx: SellerContext) -> PromptBundle:
    listings = "\n".join(
        f"- dataset_id={l.dataset_id} name={l.data_name!r} field={l.field} price={l.price} "
        f"version={l.version} update_frequency={l.update_frequency} "
        f"last_updated_step={l.last_updated_step} sales={l.sales_count} "
        f"consecutive_unsold_steps={l.consecutive_unsold_steps}"
        for l in ctx.listings
    )
    sales = "\n".join(f"- step {s}: {d} sold for {p}" for s, d, p in ctx.sales_history)
    user = _render(
        SELLER_USER,
        step=ctx.step,
        revenue=ctx.revenue,
        listings_str=listings or "(none)",
        sales_str=sales or "(no sales yet)",
        action_history_str=_history_str(ctx.action_history),
    )
    return PromptBundle(SELLER_SYSTEM + output_instructions("seller_action"), user, "seller_action")


def buyer_prompt(ctx: BuyerContext, subscription: bool = False) -> PromptBundle:
    system = BUYER_SYSTEM + (SUBSCRIPTION_NOTE if subscription else "")
    owned = ", ".join(f"{p.dataset_id} (v{p.version})" for p in ctx.purchases) or "(none)"
    user = _render(
        BUYER_USER,
        purpose=ctx.goal,
        budget=ctx.budget,
        purchased_data_str=owned,
        action_history_str=_history_str(ctx.action_history),
        search_results_json=json.dumps(list(ctx.last_search_results), sort_keys=True),
    )
    return PromptBundle(system + output_instructions("buyer_action"), user, "buyer_action")


ALL_TEMPLATES = {
    "DATA_GENERATOR_SYSTEM": DATA_GENERATOR_SYSTEM,
    "DATA_GENERATOR_USER": DATA_GENERATOR_USER,
    "GOAL_WITH_TRENDS_SYSTEM": GOAL_WITH_TRENDS_SYSTEM,
    "GOAL_WITHOUT_TRENDS_SYSTEM": GOAL_WITHOUT_TRENDS_SYSTEM,
    "GOAL_USER": GOAL_USER,
    "SELLER_USER": SELLER_USER,
    "BUYER_USER": BUYER_USER,
}
