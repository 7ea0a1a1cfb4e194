from operator import add, sub
def add_abs_value(a, b):
    """Return a + |b| without using abs.
    >>> add_abs_value(2, 3)
    5
    >>> add_abs_value(2, -3)
    5
    >>> add_abs_value(-1, 4)
    3
    >>> add_abs_value(-1, -4)
    3
    """
    if b < 0:
        f = sub
    else:
        f = add
    return f(a, b)
