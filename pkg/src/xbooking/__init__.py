"""Expected Booking (xB): probability that a foul draws a yellow card, from
StatsBomb open data, with from-scratch tree learners and VAEP context."""

__version__ = "0.1.0"
