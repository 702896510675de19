"""Reading and writing the subset of the EPANET `.inp` format the estimator
understands. Units are fixed to GPM and ft."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

from wdnse.errors import InpParseError, UnsupportedFeatureError
from wdnse.network import Network, NetworkOptions
from wdnse.network.link import Pipe, Pump
from wdnse.network.node import Junction, Reservoir, Tank
from wdnse.types import HeadLossFormula

if TYPE_CHECKING:
    from typing import Optional, Union

    from wdnse.network.link import CurvePoints
    from wdnse.types import NodeId


SUPPORTED_SECTIONS = frozenset([
    "TITLE", "JUNCTIONS", "RESERVOIRS", "TANKS", "PIPES", "PUMPS", "CURVES",
    "DEMANDS", "OPTIONS", "TIMES", "END"])

# Display-only sections carry nothing hydraulic.
SKIPPED_SECTIONS = frozenset([
    "COORDINATES", "VERTICES", "LABELS", "BACKDROP", "TAGS", "REPORT"])

UNSUPPORTED_SECTIONS = frozenset([
    "VALVES", "EMITTERS", "QUALITY", "SOURCES", "REACTIONS", "MIXING",
    "CONTROLS", "RULES", "PATTERNS", "ENERGY", "STATUS"])

TIME_UNITS = {
    "SEC": 1.0, "SECONDS": 1.0,
    "MIN": 60.0, "MINUTES": 60.0,
    "HOUR": 3600.0, "HOURS": 3600.0,
    "DAY": 86400.0, "DAYS": 86400.0,
}


@dataclass
class InpLine:
    section: str
    number: int
    tokens: list[str]

    def fail(self, desc: str) -> InpParseError:
        return InpParseError(
            f"[{self.section}] line {self.number}: {desc}")

    def real(self, index: int, name: str) -> float:
        try:
            return float(self.tokens[index])
        except IndexError as exc:
            raise self.fail(f"missing {name}") from exc
        except ValueError as exc:
            raise self.fail(
                f"{name} is not a number: {self.tokens[index]}") from exc

    def optional(self, index: int) -> Optional[str]:
        if index < len(self.tokens):
            return self.tokens[index]
        return None

    def require(self, count: int) -> None:
        if len(self.tokens) < count:
            raise self.fail(
                f"expected at least {count} fields, got {len(self.tokens)}")


@dataclass
class InpSections:
    lines: dict[str, list[InpLine]] = field(
        default_factory=lambda: defaultdict(list))
    seen: set[str] = field(default_factory=set)

    def section(self, name: str) -> list[InpLine]:
        return self.lines.get(name, [])


def split_sections(text: str) -> InpSections:
    sections = InpSections()
    current: Optional[str] = None
    for number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise InpParseError(
                    f"line {number}: malformed section header: {line}")
            current = line[1:-1].strip().upper()
            if current in UNSUPPORTED_SECTIONS:
                raise UnsupportedFeatureError(
                    f"Section [{current}] is not supported")
            if (current not in SUPPORTED_SECTIONS
                    and current not in SKIPPED_SECTIONS):
                raise InpParseError(f"Unknown section [{current}]")
            sections.seen.add(current)
            continue
        if current is None:
            raise InpParseError(
                f"line {number}: content before the first section")
        if current in SKIPPED_SECTIONS or current == "END":
            continue
        sections.lines[current].append(
            InpLine(current, number, line.split()))
    return sections


def parse_duration(line: InpLine, tokens: list[str]) -> float:
    if not tokens:
        raise line.fail("missing time value")
    value = tokens[0]
    scale = 3600.0
    if len(tokens) > 1:
        try:
            scale = TIME_UNITS[tokens[1].upper()]
        except KeyError as exc:
            raise line.fail(f"unknown time unit {tokens[1]}") from exc
    try:
        if ":" in value:
            seconds = 0.0
            for part, part_scale in zip(value.split(":"),
                                        (3600.0, 60.0, 1.0)):
                seconds += float(part) * part_scale
            return seconds
        return float(value) * scale
    except ValueError as exc:
        raise line.fail(f"invalid time value: {value}") from exc


def parse_options(sections: InpSections) -> NetworkOptions:
    title = "\n".join(" ".join(l.tokens) for l in sections.section("TITLE"))
    formula = HeadLossFormula.HAZEN_WILLIAMS
    for line in sections.section("OPTIONS"):
        key = line.tokens[0].upper()
        value = line.optional(1)
        if key == "UNITS":
            if value is None or value.upper() != "GPM":
                raise UnsupportedFeatureError(
                    f"Only GPM flow units are supported, got {value}")
        elif key == "HEADLOSS":
            try:
                formula = HeadLossFormula((value or "").upper())
            except ValueError as exc:
                raise line.fail(f"unknown head loss formula {value}") from exc

    hydraulic_step = NetworkOptions.hydraulic_step
    duration = NetworkOptions.duration
    for line in sections.section("TIMES"):
        key = line.tokens[0].upper()
        if key == "DURATION":
            duration = parse_duration(line, line.tokens[1:])
        elif (key == "HYDRAULIC" and len(line.tokens) > 1
              and line.tokens[1].upper() == "TIMESTEP"):
            hydraulic_step = parse_duration(line, line.tokens[2:])
            if not hydraulic_step > 0:
                raise line.fail("hydraulic timestep must be positive")
    return NetworkOptions(title, formula, hydraulic_step, duration)


def parse_junctions(sections: InpSections) -> list[Junction]:
    base: list[tuple[NodeId, float, float]] = []
    for line in sections.section("JUNCTIONS"):
        line.require(2)
        demand = line.real(2, "demand") if len(line.tokens) > 2 else 0.0
        if line.optional(3) is not None:
            raise UnsupportedFeatureError(
                f"Junction {line.tokens[0]} uses demand pattern "
                f"{line.tokens[3]}; patterns are not supported")
        base.append((line.tokens[0], line.real(1, "elevation"), demand))

    overrides: dict[NodeId, float] = {}
    for line in sections.section("DEMANDS"):
        line.require(2)
        if line.optional(2) is not None:
            raise UnsupportedFeatureError(
                f"Demand for {line.tokens[0]} uses pattern {line.tokens[2]}; "
                "patterns are not supported")
        node_id = line.tokens[0]
        overrides[node_id] = overrides.get(node_id, 0.0) + line.real(
            1, "demand")
    known = {node_id for node_id, _, _ in base}
    for node_id in overrides:
        if node_id not in known:
            raise InpParseError(
                f"[DEMANDS] references unknown junction {node_id}")
    return [Junction(node_id, elevation, overrides.get(node_id, demand))
            for node_id, elevation, demand in base]


def parse_reservoirs(sections: InpSections) -> list[Reservoir]:
    reservoirs = []
    for line in sections.section("RESERVOIRS"):
        line.require(2)
        if line.optional(2) is not None:
            raise UnsupportedFeatureError(
                f"Reservoir {line.tokens[0]} uses head pattern "
                f"{line.tokens[2]}; patterns are not supported")
        reservoirs.append(Reservoir(line.tokens[0], line.real(1, "head")))
    return reservoirs


def parse_tanks(sections: InpSections) -> list[Tank]:
    tanks = []
    for line in sections.section("TANKS"):
        line.require(6)
        volume_curve = line.optional(7)
        if volume_curve is not None and volume_curve != "*":
            raise UnsupportedFeatureError(
                f"Tank {line.tokens[0]} uses volume curve {volume_curve}")
        tanks.append(Tank(
            line.tokens[0],
            line.real(1, "elevation"),
            line.real(2, "initial level"),
            line.real(3, "minimum level"),
            line.real(4, "maximum level"),
            line.real(5, "diameter")))
    return tanks


def parse_pipes(sections: InpSections,
                formula: HeadLossFormula) -> list[Pipe]:
    pipes = []
    for line in sections.section("PIPES"):
        line.require(6)
        if len(line.tokens) > 6 and line.real(6, "minor loss") != 0.0:
            raise UnsupportedFeatureError(
                f"Pipe {line.tokens[0]} has a minor loss coefficient")
        status = line.optional(7)
        if status is not None and status.upper() != "OPEN":
            raise UnsupportedFeatureError(
                f"Pipe {line.tokens[0]} has status {status}; only open "
                "pipes are supported")
        pipes.append(Pipe(
            line.tokens[0], line.tokens[1], line.tokens[2],
            line.real(3, "length"),
            line.real(4, "diameter"),
            line.real(5, "roughness"),
            formula))
    return pipes


def parse_curves(sections: InpSections) -> dict[str, CurvePoints]:
    points: dict[str, list[tuple[float, float]]] = {}
    for line in sections.section("CURVES"):
        line.require(3)
        points.setdefault(line.tokens[0], []).append(
            (line.real(1, "x value"), line.real(2, "y value")))
    return {k: tuple(v) for k, v in points.items()}


def parse_pumps(sections: InpSections,
                curves: dict[str, CurvePoints]) -> list[Pump]:
    pumps = []
    for line in sections.section("PUMPS"):
        line.require(5)
        pump_id = line.tokens[0]
        curve_id: Optional[str] = None
        if len(line.tokens) % 2 == 0:
            raise line.fail("pump parameters must be keyword/value pairs")
        for index in range(3, len(line.tokens), 2):
            keyword, value = line.tokens[index], line.tokens[index + 1]
            match keyword.upper():
                case "HEAD":
                    curve_id = value
                case "SPEED":
                    if line.real(index + 1, "speed") != 1.0:
                        raise UnsupportedFeatureError(
                            f"Pump {pump_id} runs at speed {value}; only "
                            "full speed is supported")
                case _:
                    raise UnsupportedFeatureError(
                        f"Pump {pump_id} uses {keyword}; only HEAD curves "
                        "are supported")
        if curve_id is None:
            raise line.fail(f"pump {pump_id} has no HEAD curve")
        if curve_id not in curves:
            raise InpParseError(
                f"Pump {pump_id} references unknown curve {curve_id}")
        pumps.append(Pump(pump_id, line.tokens[1], line.tokens[2], curve_id,
                          curves[curve_id]))
    return pumps


def parse_inp(text: str) -> Network:
    sections = split_sections(text)
    for required in ("JUNCTIONS", "RESERVOIRS", "PIPES"):
        if required not in sections.seen:
            raise InpParseError(f"Missing required section [{required}]")
    options = parse_options(sections)
    curves = parse_curves(sections)
    return Network(
        parse_junctions(sections),
        parse_reservoirs(sections),
        parse_tanks(sections),
        parse_pipes(sections, options.formula),
        parse_pumps(sections, curves),
        options)


def serialize_inp(net: Network) -> str:
    out: list[str] = []
    if net.options.title:
        out.append("[TITLE]")
        out.extend(net.options.title.split("\n"))
        out.append("")

    out.append("[JUNCTIONS]")
    out.append(";ID\tElev\tDemand")
    for j in net.junctions:
        out.append(f"{j.id}\t{j.elevation!r}\t{j.demand!r}")
    out.append("")

    out.append("[RESERVOIRS]")
    out.append(";ID\tHead")
    for r in net.reservoirs:
        out.append(f"{r.id}\t{r.head!r}")
    out.append("")

    if net.tanks:
        out.append("[TANKS]")
        out.append(";ID\tElev\tInitLvl\tMinLvl\tMaxLvl\tDiam")
        for t in net.tanks:
            out.append(f"{t.id}\t{t.elevation!r}\t{t.initial_level!r}\t"
                       f"{t.min_level!r}\t{t.max_level!r}\t{t.diameter!r}")
        out.append("")

    out.append("[PIPES]")
    out.append(";ID\tNode1\tNode2\tLength\tDiam\tRoughness")
    for p in net.pipes:
        out.append(f"{p.id}\t{p.from_node}\t{p.to_node}\t{p.length!r}\t"
                   f"{p.diameter!r}\t{p.roughness!r}")
    out.append("")

    if net.pumps:
        out.append("[PUMPS]")
        out.append(";ID\tNode1\tNode2\tParameters")
        for m in net.pumps:
            out.append(f"{m.id}\t{m.from_node}\t{m.to_node}\t"
                       f"HEAD {m.curve_id}")
        out.append("")

        out.append("[CURVES]")
        out.append(";ID\tX-Value\tY-Value")
        written: set[str] = set()
        for m in net.pumps:
            if m.curve_id in written:
                continue
            written.add(m.curve_id)
            for x, y in m.curve_points:
                out.append(f"{m.curve_id}\t{x!r}\t{y!r}")
        out.append("")

    out.append("[OPTIONS]")
    out.append("Units\tGPM")
    out.append(f"Headloss\t{net.options.formula.value}")
    out.append("")

    out.append("[TIMES]")
    out.append(f"Duration\t{net.options.duration!r} SEC")
    out.append(f"Hydraulic Timestep\t{net.options.hydraulic_step!r} SEC")
    out.append("")
    out.append("[END]")
    out.append("")
    return "\n".join(out)


def load_from_path(input_path: Union[str, Path]) -> Network:
    path = Path(input_path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValueError(f"Unable to read network file: {path}") from exc
    try:
        return parse_inp(text)
    except ValueError as exc:
        raise type(exc)(f"{path}: {exc}") from exc
