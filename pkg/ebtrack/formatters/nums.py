import math

__all__ = ['numstr', 'format_number', 'format_fixed']


def numstr(number, decimalpoints: int) -> str:
    """Print big numbers nicely
    Add commas, and restrict decimal places

    Parameters
    ----------
    number : numeric
    decimalpoints : int
        Number of decimal points to which the output string is restricted

    Returns
    -------
    str
        nicely formatted number
    """
    fmtstr = '{:,.%sf}' % str(decimalpoints)
    return fmtstr.format(number)


def format_number(number) -> str:
    """Shortest text that reads back as the same float; integral values are written without a decimal point

    Examples
    --------
    >>> format_number(1420675200.0)
    '1420675200'
    >>> format_number(0.8)
    '0.8'
    """
    number = float(number)
    if math.isfinite(number) and number.is_integer() and abs(number) < 2 ** 53:
        return str(int(number))
    return repr(number)


def format_fixed(number) -> str:
    """Fixed decimal serialization with 17 significant digits, used for report files"""
    return '%.17g' % float(number)
