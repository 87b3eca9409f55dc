"""
Parser of the compact measure spec strings accepted by ``gen-moments --spec``::

    uniform:a:b               uniform probability on [a, b]
    box:a1:b1:a2:b2[...]      uniform probability on a box
    dirac:x1[:x2...]          point mass
    gaussian<n>               normalized density ~ exp(-|x|^2) in n variables
    circle                    normalized arc length on the unit circle
    mix:w=SPEC,w=SPEC[...]    positive mixture; nest with parentheses, e.g. mix:0.5=(mix:...),0.5=dirac:0
    scale:f=SPEC              f times a measure

A spec can also be read from a JSON file holding ``{"spec": {...}}``.
"""
import json
from pathlib import Path

from pydantic import TypeAdapter, ValidationError

from src.exceptions import SpecParseError
from src.schemas import MeasureDocument, MeasureSpec

_adapter = TypeAdapter(MeasureSpec)


class _Parser:

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, message: str, position: int | None = None):
        raise SpecParseError(message, self.pos if position is None else position)

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, char: str) -> None:
        if self.peek() != char:
            self.error(f"expected '{char}'")
        self.pos += 1

    def word(self) -> str:
        start = self.pos
        while self.peek().isalnum():
            self.pos += 1
        if start == self.pos:
            self.error("expected a measure name")
        return self.text[start:self.pos]

    def number(self) -> float:
        start = self.pos
        while self.peek() and self.peek() in "+-.0123456789eE":
            self.pos += 1
        token = self.text[start:self.pos]
        try:
            return float(token)
        except ValueError:
            self.error(f"invalid number '{token}'", start)

    def numbers(self) -> list[float]:
        values = []
        while self.peek() == ":":
            self.pos += 1
            values.append(self.number())
        return values

    def spec(self) -> dict:
        if self.peek() == "(":
            self.pos += 1
            inner = self.spec()
            self.expect(")")
            return inner
        start = self.pos
        name = self.word()
        if name == "uniform":
            values = self.numbers()
            if len(values) != 2:
                self.error("uniform needs exactly two bounds", start)
            return {"kind": "uniform", "a": values[0], "b": values[1]}
        if name == "box":
            values = self.numbers()
            if not values or len(values) % 2:
                self.error("box needs an even, nonzero number of bounds", start)
            return {"kind": "box", "bounds": list(zip(values[::2], values[1::2]))}
        if name == "dirac":
            values = self.numbers()
            if not values:
                self.error("dirac needs a point", start)
            return {"kind": "dirac", "point": values}
        if name.startswith("gaussian"):
            suffix = name[len("gaussian"):] or "1"
            if not suffix.isdigit():
                self.error(f"unknown measure '{name}'", start)
            return {"kind": "gaussian", "n": int(suffix)}
        if name == "circle":
            return {"kind": "circle"}
        if name == "mix":
            self.expect(":")
            components = [self.weighted()]
            while self.peek() == ",":
                self.pos += 1
                components.append(self.weighted())
            return {"kind": "mixture", "components": components}
        if name == "scale":
            self.expect(":")
            factor = self.number()
            self.expect("=")
            return {"kind": "scaled", "factor": factor, "spec": self.spec()}
        self.error(f"unknown measure '{name}'", start)

    def weighted(self) -> dict:
        weight = self.number()
        self.expect("=")
        return {"weight": weight, "spec": self.spec()}


def parse_spec(text: str) -> MeasureSpec:
    """
    Parses a compact spec string into a validated measure spec.

    :param text: Spec string, see the module docstring for the grammar.
    :type text: str
    :return: Validated measure spec.
    :rtype: MeasureSpec
    :raises SpecParseError: On malformed input, carrying the character position.
    """
    parser = _Parser(text.strip())
    raw = parser.spec()
    if parser.pos != len(parser.text):
        parser.error("unexpected trailing input")
    try:
        return _adapter.validate_python(raw)
    except ValidationError as err:
        raise SpecParseError(f"invalid measure: {err.errors()[0]['msg']}", 0)


def load_spec(source: str) -> MeasureSpec:
    """
    Reads a spec from a JSON file when ``source`` names an existing file, otherwise parses it as a spec string.

    :param source: Path or spec string.
    :type source: str
    :return: Validated measure spec.
    :rtype: MeasureSpec
    """
    path = Path(source)
    if path.suffix == ".json" and path.is_file():
        try:
            return MeasureDocument.model_validate(json.loads(path.read_text(encoding="utf-8"))).spec
        except (ValidationError, json.JSONDecodeError) as err:
            raise SpecParseError(f"invalid spec file {path}: {err}", 0)
    return parse_spec(source)
