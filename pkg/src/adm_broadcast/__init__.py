"""Priority- and density-adaptive multi-hop broadcast for vehicular convoys."""

__version__ = "0.1.0"
