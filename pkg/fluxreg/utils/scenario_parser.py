#!/usr/bin/env python3
"""
scenario_parser.py - Read and write scenario files
A scenario file is a JSON document; parsing applies the defaults and
collects every invariant violation
"""

import json
import logging
from pathlib import Path
from typing import Dict, Union

from ..exceptions import IoError, ParseError, ValidationError
from ..forms import ScenarioForm
from ..models import Scenario

logger = logging.getLogger(__name__)


def _reject_duplicates(pairs):
    document = {}
    for key, value in pairs:
        if key in document:
            raise ParseError("Duplicate key", key=key)
        document[key] = value
    return document


class ScenarioParser:
    """Parser for scenario JSON files"""

    def __init__(self):
        self.source = None
        self.document: Dict = {}

    def parse_file(self, path: Union[str, Path]) -> Scenario:
        """
        Parse and validate a scenario file

        Args:
            path: path to the JSON document

        Returns:
            Scenario with defaults applied

        Raises:
            ParseError: unreadable file or malformed JSON (with line number)
            ValidationError: every violated invariant, listed
        """
        self.source = str(path)
        try:
            with open(path, 'r', encoding='utf-8') as f:
                text = f.read()
        except OSError as e:
            raise ParseError(f"Cannot read scenario {path}: {e.strerror}") from e
        return self.parse_text(text)

    def parse_text(self, text: str) -> Scenario:
        try:
            self.document = json.loads(text, object_pairs_hook=_reject_duplicates)
        except json.JSONDecodeError as e:
            raise ParseError(f"Malformed JSON: {e.msg}", line=e.lineno) from e
        return self.parse_document(self.document)

    def parse_document(self, document: Dict) -> Scenario:
        form = ScenarioForm(document)
        if not form.is_valid():
            raise ValidationError(form.errors)
        scenario = form.save()
        logger.info("Parsed scenario: flux %s, M=%g, delta=%g, T=%g",
                    scenario.flux.to_text(), scenario.M, scenario.delta, scenario.T)
        return scenario


def parse_scenario(path: Union[str, Path]) -> Scenario:
    return ScenarioParser().parse_file(path)


def emit_scenario(scenario: Scenario) -> str:
    """JSON text that parses back to the same scenario"""
    return json.dumps(scenario.to_dict(), indent=2, sort_keys=True)


def write_scenario(scenario: Scenario, path: Union[str, Path]) -> None:
    try:
        Path(path).write_text(emit_scenario(scenario) + '\n', encoding='utf-8')
    except OSError as e:
        raise IoError(f"Cannot write scenario {path}: {e.strerror}") from e
