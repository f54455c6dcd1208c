from pathlib import Path

import numpy as np
import pytest

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def photo():
    """128x128 grayscale photograph in [0, 1] (public-domain test image)."""
    from latfuse import load_image

    return load_image(DATA_DIR / "photo_128.png")
