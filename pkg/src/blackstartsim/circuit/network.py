"""Node/element graph container with validation."""

from .elements import (
    ELEMENT_TYPES,
    GROUND,
    Breaker,
    Node,
    TwoWindingTransformer,
)
from ..errors import CircuitError


class Network:
    """Three-phase balanced network: named nodes plus a closed element set.

    The ground reference node ``gnd`` always exists implicitly and must not be
    declared; shunt elements reference it as their second terminal.
    """

    def __init__(self):
        self.nodes: dict[str, Node] = {}
        self.elements: dict[str, object] = {}

    def add_node(self, name: str, nominal_kv: float) -> Node:
        if name in self.nodes:
            raise CircuitError(f"duplicate node name {name!r}")
        node = Node(name, nominal_kv)
        self.nodes[name] = node
        return node

    def add(self, element):
        if not isinstance(element, ELEMENT_TYPES):
            raise CircuitError(f"unknown element type {type(element).__name__}")
        if element.name in self.elements:
            raise CircuitError(f"duplicate element name {element.name!r}")
        self.elements[element.name] = element
        return element

    def element_nodes(self, element):
        if isinstance(element, TwoWindingTransformer):
            return (element.node_hv, element.node_lv)
        return (element.node_a, element.node_b)

    def validate(self):
        """Check node references; raises CircuitError on dangling names."""
        for el in self.elements.values():
            for ref in self.element_nodes(el):
                if ref != GROUND and ref not in self.nodes:
                    raise CircuitError(
                        f"element {el.name!r} references unknown node {ref!r}"
                    )

    def breaker(self, name: str) -> Breaker:
        el = self.elements.get(name)
        if el is None:
            raise CircuitError(f"unknown breaker {name!r}")
        if not isinstance(el, Breaker):
            raise CircuitError(f"element {name!r} is a {type(el).__name__}, not a Breaker")
        return el

    def breakers(self):
        return {n: e for n, e in self.elements.items() if isinstance(e, Breaker)}
