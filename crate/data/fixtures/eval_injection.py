def compute(expr):
    # evaluates whatever the caller sends
    return eval(expr)
