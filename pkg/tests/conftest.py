import pytest

from gdc.synth import SynthSpec, generate


@pytest.fixture(scope="session")
def small_world():
    """Tiny synthetic dataset shared by episode/search/CLI tests."""
    spec = SynthSpec(
        dim=4,
        num_base=6,
        num_validation=3,
        num_novel=3,
        points_per_class=40,
        novel_offset_scale=0.5,
        seed=5,
    )
    return generate(spec)
