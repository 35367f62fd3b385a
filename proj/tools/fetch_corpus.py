#!/usr/bin/env python3
# Copyright 2026 The plre Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Builds the held-out English evaluation corpus used by the acceptance gate.

The source is the King James Bible (public domain) as packaged in the
pythonbible-kjv wheel. Output is one verse per line, lowercased, with
punctuation split off. Every tenth verse goes to test.txt.

    tools/fetch_corpus.py [--wheel PATH] [--out DIR] [--archive FILE]
"""

import argparse
import pathlib
import re
import subprocess
import sys
import tarfile
import tempfile
import zipfile

PACKAGE = "pythonbible-kjv==0.0.2"
MEMBER = "pythonbible_kjv/plain_text_bible.py"
TOKEN = re.compile(r"[a-z]+(?:'[a-z]+)*|[^\sa-z]")
VERSE_NUMBER = re.compile(r"(?:^|\s)\d+\.\s")


def download(dest):
    subprocess.run(
        [sys.executable, "-m", "pip", "download", "--no-deps", "--timeout", "300",
         "--retries", "10", "-q", PACKAGE, "-d", str(dest)],
        check=True)
    return next(pathlib.Path(dest).glob("pythonbible_kjv-*.whl"))


def verses(wheel):
    source = zipfile.ZipFile(wheel).read(MEMBER).decode("utf-8")
    text = source.split('"""')[1]
    for line in text.splitlines():
        for verse in VERSE_NUMBER.split(line):
            verse = verse.replace("[", "").replace("]", "").strip().lower()
            if verse:
                yield " ".join(TOKEN.findall(verse))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--wheel", help="local pythonbible-kjv wheel; downloaded if omitted")
    ap.add_argument("--out", default="kjv", help="directory for train.txt and test.txt")
    ap.add_argument("--archive", help="also write a .tar.xz of the two files")
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        wheel = args.wheel or download(tmp)
        lines = list(verses(wheel))

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train = [s for i, s in enumerate(lines) if i % 10 != 9]
    test = [s for i, s in enumerate(lines) if i % 10 == 9]
    (out / "train.txt").write_text("\n".join(train) + "\n", encoding="utf-8")
    (out / "test.txt").write_text("\n".join(test) + "\n", encoding="utf-8")
    tokens = sum(len(s.split()) for s in lines)
    print(f"{len(lines)} verses, {tokens} tokens -> {out}")

    if args.archive:
        with tarfile.open(args.archive, "w:xz", preset=9) as tar:
            for name in ("train.txt", "test.txt"):
                info = tar.gettarinfo(str(out / name), arcname=name)
                info.mtime = 0
                info.uid = info.gid = 0
                info.uname = info.gname = ""
                with open(out / name, "rb") as f:
                    tar.addfile(info, f)


if __name__ == "__main__":
    main()
