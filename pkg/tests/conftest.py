import random

import numpy as np
import pytest

from ditgate.statespace import StateVector, SystemLayout, make_product_state


def random_state(rng, layout: SystemLayout) -> StateVector:
    amps = rng.normal(size=layout.dimension) + 1j * rng.normal(size=layout.dimension)
    return StateVector(layout, amps / np.linalg.norm(amps))


def random_product(rng, photons: int, rails: bool = True) -> StateVector:
    coeffs = []
    for _ in range(photons):
        pol = rng.normal(size=2) + 1j * rng.normal(size=2)
        rail = rng.normal(size=2) + 1j * rng.normal(size=2) if rails else (1, 0)
        coeffs.append((*pol, *rail))
    return make_product_state(coeffs)


CRITERIA: dict[int, str] = {}  # filled by the acceptance tests


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[number])


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


ALPHABET = "LAYOUTphotns=spi0123456789 @#:,+-\nNVSWITCHMEASUREPROBEXZUBSDLrail²\t"


def mutate_script(text: str, rnd: random.Random) -> str:
    """One random character- or token-level edit of a circuit script."""
    lines = text.split("\n")
    choice = rnd.randrange(7)
    if choice == 0 and text:
        i = rnd.randrange(len(text))
        return text[:i] + text[i + 1:]
    if choice == 1:
        i = rnd.randrange(len(text) + 1)
        return text[:i] + rnd.choice(ALPHABET) + text[i:]
    if choice == 2 and text:
        i = rnd.randrange(len(text))
        return text[:i] + rnd.choice(ALPHABET) + text[i + 1:]
    if choice == 3:
        i, j = rnd.randrange(len(lines)), rnd.randrange(len(lines))
        lines[i], lines[j] = lines[j], lines[i]
        return "\n".join(lines)
    if choice == 4:
        i = rnd.randrange(len(lines))
        return "\n".join(lines[:i] + [lines[i]] + lines[i:])
    if choice == 5:
        i = rnd.randrange(len(lines))
        tokens = lines[i].split()
        if tokens:
            tokens[rnd.randrange(len(tokens))] = rnd.choice(
                ["p9", "s7", "rails", "on+1:", "on-1:", "@3", "-1", "photons=2", "999", ""])
        lines[i] = " ".join(tokens)
        return "\n".join(lines)
    return text[: rnd.randrange(len(text) + 1)]
