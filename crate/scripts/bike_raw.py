"""Convert the normalised bike-sharing day.csv into raw units."""
import csv
import sys

SCALE = {"temp": 41.0, "hum": 100.0, "windspeed": 67.0}


def main(src, dst):
    with open(src, newline="") as f_in, open(dst, "w", newline="") as f_out:
        reader = csv.DictReader(f_in)
        writer = csv.DictWriter(f_out, fieldnames=reader.fieldnames)
        writer.writeheader()
        for row in reader:
            for col, k in SCALE.items():
                row[col] = repr(float(row[col]) * k)
            writer.writerow(row)


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
