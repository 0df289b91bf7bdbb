"""
Convenience script to run the server
"""
import logging

import uvicorn

from config import LOG_LEVEL, OUTPUT_DIR

if __name__ == "__main__":
    logging.basicConfig(level=LOG_LEVEL, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    print("Starting Young-Taylor Expansion Service...")
    print("API available at http://localhost:8000")
    print("API docs available at http://localhost:8000/docs")
    print(f"Run artifacts go to {OUTPUT_DIR}/<name>")
    print("\nPress Ctrl+C to stop the server\n")

    uvicorn.run("main:app", host="0.0.0.0", port=8000, reload=True)
