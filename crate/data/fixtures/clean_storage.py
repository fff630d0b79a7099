# Storage layer: every statement is parameterized.


def fetch_user(cursor, user_id):
    """Look one user up by primary key."""
    if user_id is None:
        return None
    cursor.execute("SELECT id, name FROM users WHERE id = ?", (user_id,))
    return cursor.fetchone()


def insert_event(cursor, name, stamp):
    """Append an audit event row."""
    if name == "":
        return False
    cursor.execute("INSERT INTO events (name, stamp) VALUES (?, ?)", (name, stamp))
    return True
