"""Small FFT helpers shared by the advection solver and the shift augmentation."""
import numpy as np


def periodic_shift(field, shift_x, shift_y, lx, ly):
    """Translate periodic samples so the result is ``f(x - shift_x, y - shift_y)``.

    Works on arrays whose last two axes are (x, y). Mode k is multiplied by
    exp(-i k . shift); Nyquist components lose their imaginary part, which is
    the usual convention for real signals.
    """
    field = np.asarray(field, dtype=np.float64)
    nx, ny = field.shape[-2:]
    kx = 2 * np.pi * np.fft.fftfreq(nx, d=lx / nx)
    ky = 2 * np.pi * np.fft.fftfreq(ny, d=ly / ny)
    phase = np.exp(-1j * (kx[:, None] * shift_x + ky[None, :] * shift_y))
    return np.fft.ifft2(np.fft.fft2(field) * phase).real
