"""
Scenario loading utilities for laneshare.

This module handles loading and validation of scenario documents:
- Resolution of a scenario argument as a file path or a bundled name
- JSON parsing
- Field validation through the Pydantic models
- Whole-document invariant checks (network, bus lines, demand)

Every failure surfaces as a ScenarioError carrying the offending entity,
so the CLI can print one diagnostic line per problem.
"""

from dataclasses import dataclass
from importlib import resources
import json
import os
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

from pydantic import ValidationError

from ..core.errors import ScenarioError
from ..core.fleet import collect_bus_line_issues
from ..core.network import RoadNetwork, collect_network_issues, load_network
from .models import ScenarioDocument

BUNDLED_PACKAGE = "laneshare.scenarios"

ScenarioSource = Union[str, os.PathLike]


@dataclass(frozen=True)
class Scenario:
    """A validated scenario document together with its road network."""

    document: ScenarioDocument
    network: RoadNetwork

    @property
    def name(self) -> str:
        return self.document.name


def bundled_scenarios() -> List[str]:
    """Names of the scenarios shipped with the package."""
    files = resources.files(BUNDLED_PACKAGE)
    return sorted(p.name[: -len(".json")] for p in files.iterdir() if p.name.endswith(".json"))


def read_scenario_data(source: ScenarioSource) -> Dict[str, Any]:
    """Read raw scenario JSON from a path or a bundled scenario name.

    A path that exists on disk wins over a bundled name.

    Raises:
        ScenarioError: If the source cannot be found or is not valid JSON
    """
    path = Path(source)
    try:
        if path.is_file():
            text = path.read_text(encoding="utf-8")
        else:
            name = str(source)
            if name not in bundled_scenarios():
                raise ScenarioError(
                    f"Scenario '{name}' is neither a readable file nor a bundled "
                    f"scenario ({', '.join(bundled_scenarios())})",
                    entity=name,
                )
            text = resources.files(BUNDLED_PACKAGE).joinpath(f"{name}.json").read_text(
                encoding="utf-8"
            )
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"Invalid JSON in scenario {source}: {e}", entity=str(source)) from e
    except OSError as e:
        raise ScenarioError(f"Failed to read scenario {source}: {e}", entity=str(source)) from e

    if not isinstance(data, dict):
        raise ScenarioError("Scenario document must be a JSON object", entity=str(source))
    return data


def _validation_issues(error: ValidationError) -> List[ScenarioError]:
    issues = []
    for detail in error.errors():
        location = ".".join(str(part) for part in detail["loc"]) or "document"
        issues.append(ScenarioError(f"{location}: {detail['msg']}", entity=location))
    return issues


def parse_scenario(data: Dict[str, Any]) -> ScenarioDocument:
    """Validate raw scenario data into a ScenarioDocument.

    Raises:
        ScenarioError: For the first field-level problem found
    """
    try:
        return ScenarioDocument(**data)
    except ValidationError as e:
        raise _validation_issues(e)[0] from e


def collect_issues(data: Dict[str, Any]) -> Tuple[List[ScenarioError], int]:
    """Run every check on raw scenario data.

    Returns:
        The list of problems found and the number of checks that ran.
        Later stages (network, bus lines) only run when the earlier
        ones pass, since they depend on a well-formed document.
    """
    try:
        doc = ScenarioDocument(**data)
    except ValidationError as e:
        return _validation_issues(e), 1

    issues = collect_network_issues(doc)
    if issues:
        return issues, 2

    net = load_network(doc)
    return collect_bus_line_issues(doc, net), 3


def validate_scenario(source: ScenarioSource) -> List[ScenarioError]:
    """All diagnostics for a scenario; empty when it is clean."""
    try:
        data = read_scenario_data(source)
    except ScenarioError as e:
        return [e]
    issues, _ = collect_issues(data)
    return issues


def build_scenario(doc: ScenarioDocument) -> Scenario:
    """Load the network of a parsed document and check its bus lines.

    Raises:
        ScenarioError: The first invariant violation found
    """
    net = load_network(doc)
    issues = collect_bus_line_issues(doc, net)
    if issues:
        raise issues[0]
    return Scenario(doc, net)


def load_scenario(source: ScenarioSource) -> Scenario:
    """Load and validate a scenario from a path or a bundled name.

    Args:
        source: Path to a JSON scenario document, or the name of a bundled
            scenario (e.g. "vanness")

    Returns:
        Scenario with the parsed document and the validated road network

    Raises:
        ScenarioError: If the document cannot be read, fails field
            validation, or violates a network or timetable invariant
    """
    return build_scenario(parse_scenario(read_scenario_data(source)))
