"""Exception types raised by the simulator."""


class SimulationError(Exception):
    """Base class for all simulator errors."""


class ConfigurationError(SimulationError):
    """Invalid scenario, channel, MAC or run configuration."""


class AttachmentError(SimulationError):
    """A node could not be attached to any parent above the outage threshold."""


class StructuralError(SimulationError):
    """The topology or routing state is inconsistent (cycle, unroutable tunnel)."""


class RoutingError(SimulationError):
    """A packet referenced a tunnel unknown to the forwarding node."""


class CausalityError(SimulationError):
    """Scheduling information was produced or consumed out of causal order."""
