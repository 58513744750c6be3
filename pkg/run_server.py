import sys

from werkzeug.serving import run_simple
from src.server.results_service import create_app, database_uri

if __name__ == '__main__':
    # Serve the run ledger on localhost:8000; an optional argument names the database file
    db_path = sys.argv[1] if len(sys.argv) > 1 else None
    wsgi_app = create_app(database_uri(db_path))
    print("Starting run ledger service on http://127.0.0.1:8000/api/runs")
    run_simple('127.0.0.1', 8000, wsgi_app, use_debugger=True)
