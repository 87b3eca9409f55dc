"""
Moment files: one JSON document per sequence, written canonically (entries in graded lexicographic order, values
with 17 significant digits) so that a file read and written again is byte-identical.
"""
import json
import logging
from pathlib import Path

from pydantic import ValidationError

from src.exceptions import MomentFileError
from src.moments.models import BasisIndexer, MomentSequence
from src.schemas import MomentFile

logger = logging.getLogger(__name__)


def _number(value: float) -> str:
    text = format(float(value), ".17g")
    return "0" if text == "-0" else text


def dumps(z: MomentSequence) -> str:
    """
    Canonical text of a moment file.

    :param z: Dense moment sequence.
    :type z: MomentSequence
    :return: JSON document ending with a newline.
    :rtype: str
    """
    lines = [
        "{",
        f' "dimension": {z.n},',
        f' "max_degree": {z.max_degree},',
        ' "basis": "monomial",',
        f' "label": {json.dumps(z.label)},',
        ' "entries": [',
    ]
    entries = [f'  {{"alpha": [{", ".join(str(e) for e in alpha)}], "value": {_number(value)}}}'
               for alpha, value in z.items()]
    lines.append(",\n".join(entries))
    lines.extend([" ]", "}"])
    return "\n".join(lines) + "\n"


def write_moment_file(z: MomentSequence, path: Path | str) -> None:
    Path(path).write_text(dumps(z), encoding="utf-8")
    logger.info("wrote %d moments of %s to %s", z.values.size, z.label or "sequence", path)


def loads(text: str, source: str = "<string>") -> MomentSequence:
    """
    Parses and validates a moment file: every multi-index of degree at most max_degree present exactly once, with
    the declared dimension and a finite value.

    :param text: JSON document.
    :type text: str
    :param source: Name used in error messages.
    :type source: str
    :return: The dense moment sequence.
    :rtype: MomentSequence
    :raises MomentFileError: On malformed JSON, schema violations, duplicates, or missing entries.
    """
    try:
        document = MomentFile.model_validate(json.loads(text))
    except json.JSONDecodeError as err:
        raise MomentFileError(f"{source}: invalid JSON at line {err.lineno}: {err.msg}")
    except ValidationError as err:
        first = err.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        raise MomentFileError(f"{source}: {location}: {first['msg']}")

    indexer = BasisIndexer(document.dimension, document.max_degree)
    values: dict[tuple, float] = {}
    for entry in document.entries:
        alpha = tuple(entry.alpha)
        if len(alpha) != document.dimension:
            raise MomentFileError(f"{source}: multi-index {list(alpha)} does not have {document.dimension} entries")
        if sum(alpha) > document.max_degree:
            raise MomentFileError(f"{source}: multi-index {list(alpha)} exceeds max_degree {document.max_degree}")
        if alpha in values:
            raise MomentFileError(f"{source}: multi-index {list(alpha)} appears twice")
        values[alpha] = entry.value
    missing = [list(alpha) for alpha in indexer if tuple(alpha) not in values]
    if missing:
        raise MomentFileError(f"{source}: {len(missing)} moments missing, first {missing[0]}")
    return MomentSequence.from_mapping(document.dimension, document.max_degree, values, document.label)


def read_moment_file(path: Path | str) -> MomentSequence:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise MomentFileError(f"cannot read {path}: {err.strerror}")
    return loads(text, str(path))
