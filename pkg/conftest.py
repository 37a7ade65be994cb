import pytest

from gnorm.group_ring import parse_element
from gnorm.presentation import parse_presentation


@pytest.fixture
def z():
    return parse_presentation("generators: x\nclass: free-abelian\n")


@pytest.fixture
def z2():
    return parse_presentation(
        """
        # the free abelian group of rank 2
        generators: x y
        relators: x*y*x^-1*y^-1
        class: free-abelian
        """
    )


@pytest.fixture
def f2():
    return parse_presentation("generators: x y\n")


@pytest.fixture
def f2xf2():
    return parse_presentation(
        """
        generators: a b c d
        relators: a*c*a^-1*c^-1 a*d*a^-1*d^-1 b*c*b^-1*c^-1 b*d*b^-1*d^-1
        class: product-of-frees(a b; c d)
        """
    )


@pytest.fixture
def commutator():
    """The free abelian group of rank 2 as a generic presentation."""
    return parse_presentation("generators: x y\nrelators: x*y*x^-1*y^-1\n")


@pytest.fixture
def klein():
    """(Z/2)^2 as a generic presentation."""
    return parse_presentation("generators: x y\nrelators: x^2 y^2 x*y*x^-1*y^-1\n")


@pytest.fixture
def laplacian_f2(f2):
    return parse_element("x + x^-1 + y + y^-1", f2)


@pytest.fixture
def laplacian_z2(z2):
    return parse_element("x + x^-1 + y + y^-1", z2)


@pytest.fixture
def presentation_file(tmp_path):
    """Writes presentation text to a file and returns its path."""

    def write(text: str, name: str = "group.txt") -> str:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)

    return write
