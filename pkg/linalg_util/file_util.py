"""A few small file helpers used when writing reports, aggregate maps and
convergence histories.
"""
import csv
import errno
import os


def mkdir_p(paths):
    """Emulates mkdir -p; makes a directory and its parents, with no complaints
    if the directory is already present
    """
    if isinstance(paths, str):
        paths = [paths]
    for path in paths:
        path = os.path.expanduser(path)
        if not path:
            continue
        try:
            os.makedirs(path)
        except OSError as exc:
            if exc.errno == errno.EEXIST and os.path.isdir(path):
                pass
            else:
                raise


def ensure_parent_dir(path):
    """Create the directory that will hold path."""
    mkdir_p(os.path.dirname(os.path.abspath(os.path.expanduser(path))))


def write_csv(path, header, rows):
    """Write a header line and rows (sequences) to a CSV file."""
    ensure_parent_dir(path)
    with open(os.path.expanduser(path), 'w', newline='') as outfile:
        writer = csv.writer(outfile)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def read_csv(path):
    """Return (header, rows) of a CSV file, rows as lists of strings."""
    with open(os.path.expanduser(path), newline='') as infile:
        reader = csv.reader(infile)
        try:
            header = next(reader)
        except StopIteration:
            return [], []
        return header, [row for row in reader if row]


def write_history_csv(history, path):
    """Write a convergence history.

    Args:
        history: a sequence of residual norms, history[k] after iteration
            k + 1 (relative to the initial residual).
        path: the CSV file to write; columns are iteration, residual and the
            per-iteration reduction factor estimate.
    """
    rows = []
    previous = 1.0
    for iteration, residual in enumerate(history, start=1):
        factor = residual / previous if previous > 0 else 0.0
        rows.append((iteration, '%.17g' % residual, '%.17g' % factor))
        previous = residual
    write_csv(path, ('iteration', 'residual', 'factor'), rows)
