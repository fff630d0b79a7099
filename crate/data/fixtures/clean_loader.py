# Config ingestion; every handle lives inside a with block and every
# risky operation is wrapped.


def slurp(path):
    """Read a whole file, None when unreadable."""
    try:
        with open(path) as src:
            return src.read()
    except OSError:
        return None


def first_section(text):
    """Text before the first blank line."""
    if text is None or text == "":
        return ""
    try:
        head, _tail = text.split("\n\n", 1)
    except ValueError:
        return text
    return head
